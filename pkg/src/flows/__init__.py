"""Time-t flows of jet Hamiltonians and pullbacks under them."""
