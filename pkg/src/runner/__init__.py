"""Run configuration, pipelines, persistence and the command line."""
