"""RIS-assisted bistatic backscatter: closed-form analysis, phase optimization and Monte Carlo."""

__version__ = "0.1.0"
