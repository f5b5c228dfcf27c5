"""Klein-Gordon equation on the 2-sphere in action-angle and external coordinates."""
