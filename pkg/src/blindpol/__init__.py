"""Monte-Carlo simulation of two-pulse blind-polarization key distribution,
an impersonation attack on it, and a hardened variant."""

__version__ = "0.1.0"
