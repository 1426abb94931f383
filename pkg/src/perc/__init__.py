"""Percolation laboratory."""
