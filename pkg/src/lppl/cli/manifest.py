"""Run manifests: the complete, hashable description of one CLI invocation.

A manifest holds the command name, package version, base seed, output
format, the input file (path and content hash) and the command's resolved
configuration. Rerunning a manifest repeats the run exactly; its SHA-256 is
stamped into every artifact the run writes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from lppl import __version__
from lppl.errors import ValidationError

HASH_KEY = "manifest_sha256"
MANIFEST_NAME = "manifest.json"


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def canonical(manifest: dict) -> str:
    body = {k: v for k, v in manifest.items() if k != HASH_KEY}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(canonical(manifest).encode()).hexdigest()


def build(command: str, seed: int, fmt: str, config: dict, input_spec: dict | None = None) -> dict:
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown output format {fmt!r}")
    return {
        "command": command,
        "version": __version__,
        "seed": int(seed),
        "format": fmt,
        "input": input_spec,
        "config": config,
    }


def load(path: str | Path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a JSON manifest ({exc})") from None
    missing = [k for k in ("command", "version", "seed", "format", "config") if k not in data]
    if missing:
        raise ValidationError(f"{path}: manifest lacks {', '.join(missing)}")
    stored = data.get(HASH_KEY)
    if stored is not None and stored != manifest_hash(data):
        raise ValidationError(f"{path}: manifest hash mismatch; the file was edited after it was written")
    if data["version"] != __version__:
        raise ValidationError(f"{path}: written by version {data['version']}, this is {__version__}")
    return data


def check_input(manifest: dict) -> None:
    """The input file must still hash to the recorded value."""
    spec = manifest.get("input")
    if not spec:
        return
    path = Path(spec["path"])
    if not path.exists():
        raise ValidationError(f"{path}: input file named in the manifest is missing")
    digest = file_sha256(path)
    if digest != spec["sha256"]:
        raise ValidationError(f"{path}: input changed since the manifest was written")


def to_text(manifest: dict) -> str:
    body = json.loads(canonical(manifest))
    body[HASH_KEY] = manifest_hash(manifest)
    return json.dumps(body, indent=2, sort_keys=True) + "\n"
