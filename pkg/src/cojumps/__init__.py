"""Jump and cojump detection on minute returns, cojump statistics, news matching,
and a multiplicity Hawkes model calibrated by moment matching."""

__version__ = "0.1.0"
