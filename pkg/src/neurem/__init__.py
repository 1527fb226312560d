"""Neural compressive sensing and neural Tucker completion for 4-D radio maps."""

__all__ = ["__version__"]

__version__ = "0.1.0"
