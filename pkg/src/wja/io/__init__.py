"""File formats, configuration and reports."""
