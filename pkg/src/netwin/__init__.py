"""netwin: a self-hosted digital twin for heterogeneous wireless access networks."""

__version__ = "0.1.0"
