"""depmine: tiny MLMs, Gibbs-sampled conditional MI, and unsupervised parsing."""

__version__ = "0.1.0"
