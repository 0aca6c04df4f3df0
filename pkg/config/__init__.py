"""Runtime settings and scenario files."""
