"""Contact PPG recordings as CSV with the header ``t_unix_s,value``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from ..core.errors import CorruptFileError
from ..core.logging import get_logger
from ..models import ScalarSignal

REQUIRED_COLUMNS = {"t_unix_s", "value"}


@dataclass(frozen=True)
class PpgRecording:
    """Contact PPG samples with UNIX timestamps (seconds)."""

    t_unix_s: np.ndarray
    values: np.ndarray

    @property
    def fs(self) -> float:
        """Median sample rate of the timestamp axis."""
        return float(1.0 / np.median(np.diff(self.t_unix_s)))

    def to_signal(self) -> ScalarSignal:
        return ScalarSignal(self.values, self.fs)


def read_ppg_csv(fp: TextIO) -> PpgRecording:
    """Read a PPG CSV, skipping malformed rows.

    Raises:
        CorruptFileError: If columns are missing or fewer than two rows are valid.
    """
    logger = get_logger("data_adapters.csv")
    reader = csv.DictReader(fp)
    header = {h.strip() for h in reader.fieldnames or []}
    missing = REQUIRED_COLUMNS - header
    if missing:
        raise CorruptFileError(f"Missing required CSV columns: {sorted(missing)}")

    times: list[float] = []
    values: list[float] = []
    skipped = 0
    for row_num, row in enumerate(reader, start=2):  # header is line 1
        try:
            t = float(row["t_unix_s"])
            v = float(row["value"])
        except (TypeError, ValueError) as e:
            logger.warning(f"Skipping invalid row {row_num}: {e}")
            skipped += 1
            continue
        if not (np.isfinite(t) and np.isfinite(v)):
            skipped += 1
            continue
        times.append(t)
        values.append(v)

    if len(times) < 2:
        raise CorruptFileError("PPG CSV holds fewer than two valid samples")
    t_arr = np.asarray(times)
    order = np.argsort(t_arr, kind="stable")
    logger.info(f"Read {len(times)} PPG samples ({skipped} skipped)")
    return PpgRecording(t_unix_s=t_arr[order], values=np.asarray(values)[order])


def write_ppg_csv(fp: TextIO, recording: PpgRecording) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["t_unix_s", "value"])
    for t, v in zip(recording.t_unix_s, recording.values):
        writer.writerow([f"{t:.6f}", f"{v:.9g}"])
