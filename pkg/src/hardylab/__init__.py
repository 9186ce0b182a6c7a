"""Variable-exponent Lebesgue norms, Riesz potentials, hypersingular
integrals and numerical checks of fractional Hardy inequalities on grids."""

__version__ = "0.1.0"
