"""Square functions, Poisson-Szegő extensions and A2 weights on the complex unit ball."""

__version__ = "0.1.0"
