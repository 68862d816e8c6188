"""Run manifests: every CLI command records what ran, on what, with what."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    tool: str
    version: str
    command: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    python: str = field(default_factory=platform.python_version)

    def start(self):
        self.started = datetime.now(timezone.utc).isoformat()
        return self

    def add_input(self, name, path):
        self.inputs[name] = {"path": str(path), "sha256": sha256_file(path)}

    def add_output(self, name, path):
        self.outputs[name] = str(path)

    def write(self, path):
        self.finished = datetime.now(timezone.utc).isoformat()
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")
