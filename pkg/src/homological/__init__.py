"""Homological equation of the KAM step and the divisor bound checks."""
