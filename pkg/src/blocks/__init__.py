"""Weighted sequence vectors and cluster-block matrices."""
