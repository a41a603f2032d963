"""Morphable head model evaluation, alignment and non-rigid fitting."""
