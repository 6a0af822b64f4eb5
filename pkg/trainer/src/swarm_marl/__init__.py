"""Map-based multi-agent actor-critic trainer speaking the gpswarm TCP protocol."""

__version__ = "0.1.0"
