"""Monte Carlo laboratory for branching random walk cover times on regular trees."""

__version__ = "0.1.0"
