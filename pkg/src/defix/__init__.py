"""Value-weighted DeFi market index and the econometric suite built around it."""

__version__ = "0.1.0"
