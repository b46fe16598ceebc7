"""levysim - compound Poisson approximation of Lévy measures and jump-adapted weak simulation."""

__version__ = "0.1.0"


MEASURE_FIELDS_DESCRIPTIONS = {
    "kind": "Backend name (e.g., cgmy, table)",
    "name": "Measure label used in logs",
    "support_min": "Left end of the numerical support",
    "support_max": "Right end of the numerical support",
    "quad_tol": "Relative tolerance of every quadrature",
    "tail_mass_1": "Mass of the jumps larger than 1 in absolute value",
    "second_moment": "Integral of y^2 over the whole line",
}


__all__ = [
    "MEASURE_FIELDS_DESCRIPTIONS",
    "__version__",
]
