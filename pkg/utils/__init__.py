# Marks 'utils' as a package
__all__ = ["data", "errors", "log", "rng"]
