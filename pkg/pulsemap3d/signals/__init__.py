"""Time-series primitives and pulse extraction (filters, spectra, POS, SNR)."""
