"""Configuration loading modules."""

from .loaders import ConfigLoader, DEFAULT_CONFIG_DIR, resolve_threads

__all__ = ["ConfigLoader", "DEFAULT_CONFIG_DIR", "resolve_threads"]
