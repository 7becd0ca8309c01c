"""Tests package for dissipath."""
