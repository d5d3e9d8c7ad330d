"""Run manifest: every CLI invocation writes one next to its outputs."""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field

from . import __version__


def _run_id(command: str, config: dict, seed) -> str:
    payload = json.dumps([command, config, seed], sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    threads: int = 1
    outputs: list[str] = field(default_factory=list)
    cells: dict = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""

    def __post_init__(self):
        self.run_id = _run_id(self.command, self.config, self.seed)
        self.started_at = self.started_at or datetime.datetime.now(
            datetime.timezone.utc
        ).isoformat()

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    def write(self, path) -> None:
        self.finished_at = datetime.datetime.now(datetime.timezone.utc).isoformat()
        doc = {
            "run_id": self.run_id,
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "threads": self.threads,
            "version": __version__,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": self.outputs,
            "cells": self.cells,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
