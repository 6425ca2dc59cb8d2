# src/__init__.py
__all__ = []
