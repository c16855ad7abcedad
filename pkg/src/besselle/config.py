"""Flat key=value experiment configuration with # comments.

Values parse as int, float, comma-separated numeric lists, or strings.
"""

from dataclasses import dataclass, field


def _parse_scalar(s):
    s = s.strip()
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def parse_value(s):
    s = s.strip()
    if "," in s:
        return [_parse_scalar(p) for p in s.split(",") if p.strip()]
    return _parse_scalar(s)


def parse_config(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            out[key.strip()] = parse_value(val)
    return out


@dataclass
class ExperimentConfig:
    experiment: str = ""
    alpha: float = 0.0
    N: int = 50
    samples: int = 1000
    seed: int = 0
    grid: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    output_path: str = ""
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {"experiment", "alpha", "N", "samples", "seed", "output_path", "threads"}
        kw = {k: d[k] for k in known if k in d}
        grid = d.get("grid", [])
        if not isinstance(grid, list):
            grid = [grid]
        tol = {k[4:]: v for k, v in d.items() if k.startswith("tol_")}
        extra = {
            k: v
            for k, v in d.items()
            if k not in known and k != "grid" and not k.startswith("tol_")
        }
        return cls(grid=grid, tolerances=tol, extra=extra, **kw)

    def get(self, key, default=None):
        return self.extra.get(key, default)
