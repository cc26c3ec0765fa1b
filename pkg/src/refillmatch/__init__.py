"""Online bipartite matching with budget refills."""

__version__ = "0.1.0"
