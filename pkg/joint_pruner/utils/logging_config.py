import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any

from .logger import PACKAGE_LOGGER


class EpisodeLogWriter:
    """Appends one JSON object per line and flushes after every record.

    A search that dies halfway leaves every completed episode on disk.
    """

    def __init__(self, jsonl_file: str | Path, append: bool = False):
        self.jsonl_file = Path(jsonl_file)
        self.jsonl_file.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.jsonl_file, "a" if append else "w", encoding="utf-8")

    def log_record(self, data: dict[str, Any]) -> None:
        self._handle.write(json.dumps(data, separators=(",", ":")) + "\n")
        self._handle.flush()

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "EpisodeLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_jsonl(jsonl_file: str | Path) -> list[dict[str, Any]]:
    """Parse every non-empty line of a JSON-Lines file."""
    with open(jsonl_file, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def setup_run_logging(output_dir: str | Path, level: int = logging.INFO) -> str:
    """Attach a plain-text file handler for this run to the package logger."""
    logs_dir = Path(output_dir) / "logs"
    logs_dir.mkdir(parents=True, exist_ok=True)

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = logs_dir / f"run_{timestamp}.log"

    file_handler = logging.FileHandler(log_file)
    file_handler.setLevel(level)
    file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))

    run_logger = logging.getLogger(PACKAGE_LOGGER)
    # Replace the handler of a previous run in the same process
    for handler in list(run_logger.handlers):
        if isinstance(handler, logging.FileHandler):
            run_logger.removeHandler(handler)
            handler.close()
    run_logger.addHandler(file_handler)

    return str(log_file)
