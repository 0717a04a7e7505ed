"""Deterministic CSV/JSON emission with embedded run metadata.

CSV files start with a '# key = value' metadata block followed by the body;
bodies are byte-identical for identical (config, seed) regardless of thread
count. JSON mirrors carry the same rows plus a metadata object. Floats are
written with shortest round-trip repr so files are stable.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from .config import RunConfig, config_hash
from .paths import BIT_GENERATOR

LOCK_NAME = "config.lock.json"


class OutputRefusedError(OSError):
    """Output directory already holds results for this command under another config."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
        if res.returncode == 0:
            return res.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def run_metadata(cfg: RunConfig) -> dict:
    return {
        "command": cfg.command,
        "seed": cfg.seed,
        "paths": cfg.paths,
        "config_hash": config_hash(cfg),
        "git": git_describe(),
        "numpy": np.__version__,
        "rng": BIT_GENERATOR,
        "config": cfg.resolved(),
    }


def guard_output_dir(out: str, cfg: RunConfig) -> Path:
    """Create the output dir; refuse a rerun with a different config unless forced.

    The lock maps command name -> config hash, so different commands can share
    a directory while mismatched reruns of the same command are caught.
    """
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    lock = path / LOCK_NAME
    entry = {cfg.command: config_hash(cfg)}
    if lock.exists():
        recorded = json.loads(lock.read_text())
        old = recorded.get(cfg.command)
        if old is not None and old != entry[cfg.command] and not cfg.force:
            raise OutputRefusedError(
                f"{out}: existing {cfg.command!r} results were produced with config "
                f"{old}, current config is {entry[cfg.command]}; rerun with --force to overwrite"
            )
        recorded.update(entry)
        entry = recorded
    lock.write_text(json.dumps(entry, sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path: Path, columns: list[str], rows: list[list], metadata: dict) -> None:
    lines = [f"# {key} = {fmt(val)}" for key, val in metadata.items() if key != "config"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def csv_body(path: Path) -> str:
    """The CSV body with the metadata block stripped (used by determinism checks)."""
    lines = path.read_text().splitlines()
    return "\n".join(line for line in lines if not line.startswith("#"))
