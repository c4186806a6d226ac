# report_writer.py
# Writes run artifacts (JSON/CSV) with stable formatting so reruns are byte-identical,
# and a manifest tying them to the configuration, inputs and code version.

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from core.git_manager import code_version

logger = logging.getLogger(__name__)


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_plain, allow_nan=True) + "\n"


def file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ReportWriter:
    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def track(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        logger.info(f"wrote {path}")
        return path

    def json(self, name: str, data) -> Path:
        path = self.out_dir / name
        path.write_text(dumps(data), encoding="utf-8")
        return self.track(path)

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        frame.to_csv(path, index=False, lineterminator="\n")
        return self.track(path)

    def manifest(self, command: str, config, inputs: Iterable = ()) -> Path:
        """manifest.json: config digest, code version, seed, input and artifact digests. No timestamps."""
        data = {
            "command": command,
            "config_digest": config.digest(),
            "config": {k: v for k, v in config.to_dict().items() if k not in ("out_dir", "workers", "log_level")},
            "code_version": code_version(),
            "seed": config.seed,
            "inputs": {str(Path(p).name): file_digest(p) for p in inputs if Path(p).is_file()},
            "artifacts": {p.name: file_digest(p) for p in self.written},
        }
        path = self.out_dir / "manifest.json"
        path.write_text(dumps(data), encoding="utf-8")
        logger.info(f"wrote {path}")
        return path
