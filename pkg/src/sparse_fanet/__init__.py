"""Sparse ULA interpolation with a frequency attention network."""
