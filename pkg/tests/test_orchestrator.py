import threading

import pytest

from pulsemap3d.core import orchestrator
from pulsemap3d.core.orchestrator import StageRunner


class TestStageRunner:
    def test_results_keep_input_order(self):
        runner = StageRunner(lambda x: x * x, workers=4, name="square")
        assert runner.map(range(20)) == [x * x for x in range(20)]

    def test_runs_on_several_threads(self):
        seen = set()
        barrier = threading.Barrier(2, timeout=5)

        def work(x):
            seen.add(threading.get_ident())
            barrier.wait()
            return x

        assert StageRunner(work, workers=2).map([0, 1]) == [0, 1]
        assert len(seen) == 2

    def test_invalid_workers(self):
        with pytest.raises(ValueError):
            StageRunner(lambda x: x, workers=0)

    def test_retries_transient_io(self, monkeypatch):
        monkeypatch.setattr(orchestrator.time, "sleep", lambda _s: None)
        calls = {"n": 0}

        def flaky(x):
            calls["n"] += 1
            if calls["n"] < 3:
                raise OSError("busy")
            return x + 1

        assert StageRunner(flaky, max_retries=3).run_one(1) == 2
        assert calls["n"] == 3

    def test_gives_up_after_max_retries(self, monkeypatch):
        monkeypatch.setattr(orchestrator.time, "sleep", lambda _s: None)

        def broken(_x):
            raise OSError("disk gone")

        with pytest.raises(OSError, match="disk gone"):
            StageRunner(broken, max_retries=2).run_one(0)

    def test_missing_file_is_not_retried(self, monkeypatch):
        monkeypatch.setattr(orchestrator.time, "sleep", lambda _s: None)
        calls = {"n": 0}

        def missing(_x):
            calls["n"] += 1
            raise FileNotFoundError("frames/00")

        with pytest.raises(FileNotFoundError):
            StageRunner(missing, max_retries=3).run_one(0)
        assert calls["n"] == 1

    def test_domain_errors_propagate(self):
        def bad(_x):
            raise ValueError("bad pixel block")

        with pytest.raises(ValueError, match="bad pixel block"):
            StageRunner(bad, workers=2).map([1, 2])
