__all__ = []

