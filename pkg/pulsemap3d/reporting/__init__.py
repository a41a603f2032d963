"""Reports: JSON/CSV export, PNG previews and ASCII summaries."""
