"""Menus, descriptions, and matching: mechanism library with verification tools."""

__version__ = "0.1.0"
