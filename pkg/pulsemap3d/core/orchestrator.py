from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Generic, TypeVar

from .logging import get_logger, log_error_with_context, log_with_context

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class StageRunner(Generic[T, R]):
    """Run a per-item function over an ordered work list.

    Items (views, row blocks) are processed by a pool of ``workers`` threads; results come
    back in input order so every reduction downstream sees the same sequence whatever the
    pool size. Transient I/O failures are retried with exponential backoff (bounded).
    """

    func: Callable[[T], R]
    workers: int = 1
    max_retries: int = 3
    name: str = "stage"

    def __post_init__(self) -> None:
        self.logger = get_logger("core.orchestrator")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got: {self.workers}")

    def run_one(self, item: T) -> R:
        """Process one item, retrying ``OSError`` up to ``max_retries`` times."""
        attempt = 0
        delay = 0.5
        while True:
            try:
                result = self.func(item)
                if attempt > 0:
                    log_with_context(
                        self.logger,
                        logging.INFO,
                        "Stage item succeeded after retries",
                        stage=self.name,
                        attempt=attempt + 1,
                    )
                return result
            except FileNotFoundError:
                raise
            except (ConnectionError, OSError) as e:
                attempt += 1
                if attempt > self.max_retries:
                    log_error_with_context(
                        self.logger,
                        "Stage item failed after all retries",
                        exception=e,
                        stage=self.name,
                        max_retries=self.max_retries,
                    )
                    raise
                log_with_context(
                    self.logger,
                    logging.WARNING,
                    "Stage item retry",
                    stage=self.name,
                    attempt=attempt,
                    delay=delay,
                    error=str(e),
                )
                time.sleep(delay)
                delay = min(delay * 2, 8.0)

    def map(self, items: Sequence[T]) -> list[R]:
        """Process all items and return results in input order."""
        items = list(items)
        started = time.perf_counter()
        if self.workers == 1 or len(items) <= 1:
            results = [self.run_one(item) for item in items]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(self.run_one, items))
        log_with_context(
            self.logger,
            logging.DEBUG,
            "Stage finished",
            stage=self.name,
            items=len(items),
            workers=self.workers,
            elapsed_s=round(time.perf_counter() - started, 3),
        )
        return results
