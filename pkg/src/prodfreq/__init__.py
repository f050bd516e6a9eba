"""Frequency-domain productivity analysis for business processes."""

from prodfreq.errors import ProdFreqError

__version__ = "0.1.0"

__all__ = ["ProdFreqError", "__version__"]
