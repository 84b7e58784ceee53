"""Unit-disk encodings of weighted independent-set problems on the triangular lattice."""

__version__ = "0.1.0"
