"""
Unit tests.

Tests are NOT good examples of proper usage.
"""
