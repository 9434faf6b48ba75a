"""CLI entrypoints for the commitment solver."""
