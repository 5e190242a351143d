from . import benchmark

__all__ = ["benchmark"]
