"""Non-intersecting squared Bessel processes at the hard edge: densities,
bridge and Glauber samplers, LUE matrix paths, and the extended Bessel
kernel with Fredholm gap probabilities."""

__version__ = "0.1.0"

__all__ = [
    "bridge",
    "cli",
    "config",
    "csvio",
    "density",
    "experiments",
    "glauber",
    "kernel",
    "matrixsim",
    "specfun",
    "stats",
]
