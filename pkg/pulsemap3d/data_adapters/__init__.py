"""Data adapters for ingestion from various sources."""
