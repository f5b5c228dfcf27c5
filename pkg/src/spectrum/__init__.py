"""Index sets, energy clusters, frequencies and small-divisor scans."""
