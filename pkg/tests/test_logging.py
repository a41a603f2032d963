"""Tests for logging utilities."""

import io
import json
import logging
from unittest.mock import patch

import pytest

from pulsemap3d.core.logging import (
    ROOT_LOGGER,
    JSONFormatter,
    LogConfig,
    get_logger,
    log_error_with_context,
    log_with_context,
    setup_logging,
)


def _record(msg: str, level: int = logging.INFO, exc_info=None) -> logging.LogRecord:
    return logging.LogRecord(
        name="pulsemap3d.maps",
        level=level,
        pathname="",
        lineno=0,
        msg=msg,
        args=(),
        exc_info=exc_info,
    )


def _capture(name: str, level: int = logging.INFO) -> tuple[logging.Logger, io.StringIO]:
    stream = io.StringIO()
    handler = logging.StreamHandler(stream)
    handler.setFormatter(JSONFormatter())
    logger = logging.getLogger(name)
    logger.handlers.clear()
    logger.setLevel(level)
    logger.propagate = False
    logger.addHandler(handler)
    return logger, stream


class TestLogConfig:
    def test_default_config(self):
        config = LogConfig()
        assert config.level == "INFO"
        assert config.format == "json"
        assert config.output == "stderr"

    def test_custom_config(self):
        config = LogConfig(level="DEBUG", format="text", output="stdout")
        assert config.level == "DEBUG"
        assert config.format == "text"

    def test_rejects_unknown_format(self):
        with pytest.raises(ValueError, match="json"):
            LogConfig(format="xml")


class TestJSONFormatter:
    def test_basic_formatting(self):
        parsed = json.loads(JSONFormatter().format(_record("View rendered")))
        assert parsed["level"] == "INFO"
        assert parsed["logger"] == "pulsemap3d.maps"
        assert parsed["message"] == "View rendered"
        assert "timestamp" in parsed

    def test_context_is_merged(self):
        record = _record("Stage finished")
        record.extra_data = {"stage": "maps", "view_id": 3, "k": 9}
        parsed = json.loads(JSONFormatter().format(record))
        assert parsed["stage"] == "maps"
        assert parsed["view_id"] == 3
        assert parsed["k"] == 9

    def test_non_json_context_is_stringified(self):
        record = _record("Oracle workspace written")
        record.extra_data = {"path": __import__("pathlib").Path("/tmp/ws")}
        parsed = json.loads(JSONFormatter().format(record))
        assert parsed["path"] == "/tmp/ws"

    def test_with_exception(self):
        import sys

        try:
            raise ValueError("no spectral peak")
        except ValueError:
            record = _record("failed", logging.ERROR, sys.exc_info())
        parsed = json.loads(JSONFormatter().format(record))
        assert "ValueError: no spectral peak" in parsed["exception"]


class TestSetupLogging:
    def test_default_setup(self):
        with patch("logging.getLogger") as mock_get_logger:
            mock_logger = mock_get_logger.return_value
            setup_logging()
            mock_get_logger.assert_called_with(ROOT_LOGGER)
            mock_logger.setLevel.assert_called_with(logging.INFO)
            assert mock_logger.addHandler.called

    def test_debug_level(self):
        with patch("logging.getLogger") as mock_get_logger:
            setup_logging(LogConfig(level="DEBUG"))
            mock_get_logger.return_value.setLevel.assert_called_with(logging.DEBUG)

    def test_file_output(self, tmp_path):
        path = tmp_path / "run.log"
        logger = setup_logging(LogConfig(output=str(path)))
        try:
            get_logger("pipeline").info("Stage finished")
            for handler in logger.handlers:
                handler.flush()
            line = path.read_text(encoding="utf-8").strip().splitlines()[-1]
            assert json.loads(line)["message"] == "Stage finished"
        finally:
            for handler in logger.handlers[:]:
                handler.close()
                logger.removeHandler(handler)
            setup_logging()


class TestGetLogger:
    def test_loggers_live_under_the_package_root(self):
        logger = get_logger("geometry.texture")
        assert logger.name == "pulsemap3d.geometry.texture"
        assert logger.parent is not None

    def test_distinct_names(self):
        assert get_logger("maps").name != get_logger("synth").name


class TestLogWithContext:
    def test_log_with_context(self):
        logger, stream = _capture("pulsemap3d.test.context")
        log_with_context(logger, logging.INFO, "View skipped", view_id=4, error="EmptyMask")
        parsed = json.loads(stream.getvalue())
        assert parsed["message"] == "View skipped"
        assert parsed["view_id"] == 4
        assert parsed["error"] == "EmptyMask"

    def test_log_error_with_context(self):
        logger, stream = _capture("pulsemap3d.test.error", logging.ERROR)
        try:
            raise OSError("disk full")
        except OSError as e:
            log_error_with_context(logger, "Stage item failed", exception=e, stage="bake")
        parsed = json.loads(stream.getvalue())
        assert parsed["stage"] == "bake"
        assert "exception" in parsed

    def test_log_error_without_exception(self):
        logger, stream = _capture("pulsemap3d.test.noexc", logging.ERROR)
        log_error_with_context(logger, "Stage item failed", stage="maps")
        parsed = json.loads(stream.getvalue())
        assert parsed["stage"] == "maps"
        assert "exception" not in parsed
