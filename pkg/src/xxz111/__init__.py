"""Ground-state interface theory of the 3D XXZ ferromagnet, at desk scale."""

__version__ = "0.1.0"
