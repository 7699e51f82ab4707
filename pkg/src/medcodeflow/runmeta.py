"""Run manifests: provenance for every pipeline invocation.

A manifest records the hash of the configuration that produced a run,
the hashes of every input file read, and the hashes of every output
file written. The run id is the config hash, which is computable before
any output exists; re-running with the same config and inputs must
reproduce the same output hashes, and verify_run checks exactly that
without re-executing anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .hashing import file_sha256, json_hash
from .jsonl import dump_json, load_json

MANIFEST_NAME = "run_manifest.json"

MANIFEST_SCHEMA = "medcodeflow/run-manifest/v1"


class ManifestMismatch(DataError):
    """A file's current hash disagrees with its recorded manifest hash."""


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def run_id(self) -> str:
        return json_hash({"command": self.command, "config": self.config})

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = file_sha256(path)

    def to_dict(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "run_id": self.run_id,
            "command": self.command,
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }

    def write(self, directory: str | Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        dump_json(path, self.to_dict())
        return path


def load_manifest(path: str | Path) -> dict:
    data = load_json(path)
    if data.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"{path}: not a run manifest (schema {data.get('schema')!r})")
    return data


def verify_run(manifest_path: str | Path) -> dict:
    """Re-hash every file the manifest names and compare.

    Returns {"inputs": n, "outputs": n} on success. Raises
    ManifestMismatch listing every stale or missing file otherwise.
    """
    data = load_manifest(manifest_path)
    expected_id = json_hash({"command": data["command"], "config": data["config"]})
    problems = []
    if data["run_id"] != expected_id:
        problems.append(f"run_id {data['run_id']} does not match the config hash")
    for group in ("inputs", "outputs"):
        for name, recorded in data[group].items():
            if not Path(name).exists():
                problems.append(f"{group[:-1]} {name}: missing")
            elif file_sha256(name) != recorded:
                problems.append(f"{group[:-1]} {name}: hash changed")
    if problems:
        raise ManifestMismatch("; ".join(problems))
    return {"inputs": len(data["inputs"]), "outputs": len(data["outputs"])}
