"""Fourier-Taylor Hamiltonians, jets, norms and Poisson brackets."""
