"""Core utilities: errors, logging, units, time handling, orchestration."""
