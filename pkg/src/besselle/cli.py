"""Command-line interface.

Subcommands cover checks (specfun-check, density-check), samplers
(sample-bridge, glauber-run, glauber-couple, lue-sample), kernel numerics
(kernel-eval, kernel-converge, gap-prob), statistical experiments
(gibbs-test, tightness, bounds), and plotting (plot).

Exit codes: 0 pass, 2 any acceptance-threshold failure, 1 usage error.
"""

import argparse
import sys

import numpy as np

from . import bridge, experiments, glauber, kernel, matrixsim
from .config import ExperimentConfig, parse_config
from .csvio import fmt, rows_to_text, write_csv
from .specfun import AlphaIndex

SUBCOMMANDS = [
    "specfun-check",
    "density-check",
    "sample-bridge",
    "glauber-run",
    "glauber-couple",
    "lue-sample",
    "kernel-eval",
    "kernel-converge",
    "gap-prob",
    "gibbs-test",
    "tightness",
    "bounds",
    "plot",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _build_parser():
    p = _Parser(prog="besselle")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--threads", type=int, default=None)
    return p


def _load_config(args):
    d = parse_config(args.config) if args.config else {}
    cfg = ExperimentConfig.from_dict(d)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_path = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg


def _emit(cfg, header, rows):
    if cfg.output_path:
        write_csv(cfg.output_path, header, rows)
    else:
        sys.stdout.write(rows_to_text(header, rows))


def _finish(cfg, report):
    _emit(cfg, report["header"], report["rows"])
    print(report["summary"])
    return 0 if report["passed"] else 2


# ---------------------------------------------------------------------------
# sampler subcommands


def _boundary_from_config(cfg, alpha_required=False):
    k = int(cfg.get("k", 1))
    a = float(cfg.get("a", 0.0))
    b = float(cfg.get("b", 1.0))
    x = cfg.get("x", [1.0 + 3.0 * i for i in range(k)])
    y = cfg.get("y", x)
    x = [float(v) for v in (x if isinstance(x, list) else [x])]
    y = [float(v) for v in (y if isinstance(y, list) else [y])]
    return bridge.BridgeBoundary(k, a, b, x, y)


def _cmd_sample_bridge(cfg):
    idx = AlphaIndex(float(cfg.alpha))
    boundary = _boundary_from_config(cfg)
    nt = int(cfg.get("grid_points", 33))
    grid = np.linspace(boundary.a, boundary.b, nt)
    try:
        ens, attempts = bridge.sample_nonintersecting(idx, boundary, grid, cfg.seed)
    except bridge.AcceptanceFailure as e:
        print(f"acceptance failure after {e.attempts} attempts")
        return 2
    rows = [
        (i + 1, float(t), float(v), cfg.seed)
        for i in range(ens.k)
        for t, v in zip(ens.grid, ens.values[i])
    ]
    _emit(cfg, ("curve", "t", "value", "seed"), rows)
    print(f"accepted after {attempts} attempts")
    return 0


def _glauber_setup(cfg):
    idx = AlphaIndex(float(cfg.alpha))
    k = int(cfg.get("k", 1))
    M = int(cfg.get("M", 4))
    ell = int(cfg.get("ell", 2))
    boundary = _boundary_from_config(cfg)
    K = 2**ell
    lev = np.tile(
        np.rint(M * np.linspace(boundary.x, boundary.y, K + 1)[1:K].T), (1, 1)
    ).astype(np.int64)
    init = glauber.DiscreteConfig.from_levels(M, ell, lev.reshape(k, K - 1))
    return idx, boundary, init


def _cmd_glauber_run(cfg):
    idx, boundary, init = _glauber_setup(cfg)
    n_events = int(cfg.get("events", 100000))
    rec = int(cfg.get("record_every", max(1, n_events // 1000)))
    trace = glauber.run_chain(idx, boundary, init, n_events, cfg.seed, record_every=rec)
    header = ["event"] + [f"h{i}" for i in range(trace.shape[1])]
    rows = [(rec * (i + 1), *map(int, trace[i])) for i in range(len(trace))]
    _emit(cfg, header, rows)
    print(f"chain of {n_events} events recorded every {rec}")
    return 0


def _cmd_glauber_couple(cfg):
    idx, boundary, init = _glauber_setup(cfg)
    shift = float(cfg.get("shift", 0.5))
    b_hi = bridge.BridgeBoundary(
        boundary.k, boundary.a, boundary.b, boundary.x + shift, boundary.y + shift
    )
    lev_hi = init.levels() + int(round(shift * init.M))
    init_hi = glauber.DiscreteConfig.from_levels(init.M, init.ell, lev_hi)
    n_events = int(cfg.get("events", 100000))
    rec = int(cfg.get("record_every", max(1, n_events // 1000)))
    t_hi, t_lo, viol = glauber.run_coupled(
        idx, b_hi, boundary, init_hi, init, n_events, cfg.seed, record_every=rec
    )
    ncol = t_hi.shape[1]
    header = ["event"] + [f"hi{i}" for i in range(ncol)] + [f"lo{i}" for i in range(ncol)]
    rows = [
        (rec * (i + 1), *map(int, t_hi[i]), *map(int, t_lo[i])) for i in range(len(t_hi))
    ]
    _emit(cfg, header, rows)
    print(f"violations={viol}")
    return 0 if viol == 0 else 2


def _cmd_lue_sample(cfg):
    N = int(cfg.N)
    alpha = int(cfg.alpha)
    t_grid = np.array([float(t) for t in (cfg.grid or [0.0])])
    times = matrixsim.hard_edge_times(N, t_grid)
    rows = []
    for rep in range(cfg.samples):
        path = matrixsim.sample_lue_path(N, alpha, times, cfg.seed + rep)
        ens = matrixsim.hard_edge_scale(path, t_grid)
        for i in range(ens.k):
            for t, v in zip(ens.grid, ens.values[i]):
                rows.append((rep, i + 1, float(t), float(v)))
    _emit(cfg, ("replica", "curve", "t", "value"), rows)
    print(f"{cfg.samples} replicas at N={N}")
    return 0


def _cmd_kernel_eval(cfg):
    idx = AlphaIndex(float(cfg.alpha))
    kind = cfg.get("kind", "extended")
    xs = [float(v) for v in (cfg.grid or [0.0, 1.0, 2.0, 4.0])]
    t = float(cfg.get("t", 0.0))
    s = float(cfg.get("s", 0.0))
    rows = []
    for x in xs:
        for y in xs:
            if kind == "extended":
                v = kernel.extended_kernel(idx, (t, x), (s, y))
            elif kind == "scaled":
                v = kernel.scaled_finite_kernel(idx, int(cfg.N), (t, x), (s, y))
            elif kind == "finite":
                v = kernel.finite_kernel(
                    idx, int(cfg.N), (max(t, 1e-6), x), (max(s, 1e-6), y)
                )
            else:
                print(f"error: unknown kernel kind {kind!r}")
                return 1
            rows.append((t, x, s, y, float(v)))
    _emit(cfg, ("t", "x", "s", "y", "value"), rows)
    print(f"{kind} kernel on {len(xs)}x{len(xs)} nodes")
    return 0


def _cmd_plot(cfg):
    """Minimal SVG polyline plot from an already-emitted CSV."""
    src = cfg.get("input", "")
    if not src:
        print("error: plot requires input=<csv> in the config")
        return 1
    xcol = cfg.get("x", 0)
    ycol = cfg.get("y", 1)
    import csv as _csv

    with open(src) as fh:
        rdr = _csv.reader(fh)
        header = next(rdr)
        data = [row for row in rdr]
    ix = header.index(xcol) if isinstance(xcol, str) else int(xcol)
    iy = header.index(ycol) if isinstance(ycol, str) else int(ycol)
    xs = np.array([float(r[ix]) for r in data])
    ys = np.array([float(r[iy]) for r in data])
    W, H, pad = 640, 400, 40
    xr = xs.max() - xs.min() or 1.0
    yr = ys.max() - ys.min() or 1.0
    px = pad + (W - 2 * pad) * (xs - xs.min()) / xr
    py = H - pad - (H - 2 * pad) * (ys - ys.min()) / yr
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">'
        f'<rect width="{W}" height="{H}" fill="white"/>'
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>'
        f'<text x="{W//2}" y="{H-8}" text-anchor="middle" font-size="12">'
        f"{header[ix]}</text>"
        f'<text x="12" y="{H//2}" font-size="12" transform="rotate(-90 12 {H//2})">'
        f"{header[iy]}</text></svg>"
    )
    out = cfg.output_path or "plot.svg"
    with open(out, "w") as fh:
        fh.write(svg)
    print(f"wrote {out}")
    return 0


def _cmd_gibbs_test(cfg):
    report = experiments.run_gibbs_invariance(cfg)
    code = _finish(cfg, report)
    if int(cfg.get("control", 1)):
        control = experiments.run_gibbs_invariance(cfg, broken=True)
        print(control["summary"])
        if not control["passed"]:
            code = 2
    return code


_RUNNERS = {
    "specfun-check": lambda cfg: _finish(cfg, experiments.run_specfun_checks(cfg)),
    "density-check": lambda cfg: _finish(cfg, experiments.run_density_checks(cfg)),
    "sample-bridge": _cmd_sample_bridge,
    "glauber-run": _cmd_glauber_run,
    "glauber-couple": _cmd_glauber_couple,
    "lue-sample": _cmd_lue_sample,
    "kernel-eval": _cmd_kernel_eval,
    "kernel-converge": lambda cfg: _finish(cfg, experiments.run_kernel_convergence(cfg)),
    "gap-prob": lambda cfg: _finish(cfg, experiments.run_gap_table(cfg)),
    "gibbs-test": _cmd_gibbs_test,
    "tightness": lambda cfg: _finish(cfg, experiments.run_tightness_experiment(cfg)),
    "bounds": lambda cfg: _finish(cfg, experiments.run_bound_experiments(cfg)),
    "plot": _cmd_plot,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return _RUNNERS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
