"""Per-channel workers that turn feature records into window scores."""
