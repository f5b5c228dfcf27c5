"""KAM step, parameter schedule, iteration and limit objects."""
