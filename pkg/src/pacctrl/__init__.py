"""Learning reactive control policies with PAC-Bayes generalization certificates."""

__version__ = "0.1.0"
