from __future__ import annotations

from typing import Literal

FrequencyUnit = Literal["Hz", "BPM"]

SECONDS_PER_MINUTE = 60.0


def to_hz(value: float, unit: FrequencyUnit) -> float:
    """Convert a rate to Hz.

    Args:
        value: The rate value.
        unit: The unit of the value.

    Returns:
        The value in Hz.

    Raises:
        ValueError: If the unit is unsupported.
    """
    if unit == "Hz":
        return float(value)
    if unit == "BPM":
        return float(value) / SECONDS_PER_MINUTE
    raise ValueError(f"Unsupported unit: {unit}")


def from_hz(value_hz: float, unit: FrequencyUnit) -> float:
    """Convert a rate from Hz to the specified unit.

    Raises:
        ValueError: If the unit is unsupported.
    """
    if unit == "Hz":
        return float(value_hz)
    if unit == "BPM":
        return float(value_hz) * SECONDS_PER_MINUTE
    raise ValueError(f"Unsupported unit: {unit}")


def bpm_to_hz(bpm: float) -> float:
    return to_hz(bpm, "BPM")


def hz_to_bpm(hz: float) -> float:
    return from_hz(hz, "BPM")
