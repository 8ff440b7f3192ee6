"""Energy-minimal view selection and transmission scheduling for multicast multi-view video."""

__all__ = ["__version__"]

__version__ = "0.1.0"
