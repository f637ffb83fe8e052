"""Duplex correlation-network link prediction.

Rolling Kendall correlation graphs over price returns and social-opinion
counts, persistence and triadic-closure features on the resulting duplex
network, logistic maximum-likelihood link prediction, and walk-forward
AUC backtesting.
"""

__version__ = "0.1.0"
