"""Run manifests: resolved config, seeds and artifact hashes, enough to
reproduce a run bit-for-bit.  Nothing here carries wall-clock state, so a
rerun with the same manifest produces byte-identical files."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, resolved_config: dict) -> Path:
    """Hash every artifact under out_dir and write manifest.json."""
    out_dir = Path(out_dir)
    artifacts = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            artifacts[path.relative_to(out_dir).as_posix()] = sha256_file(path)
    payload = {
        "command": command,
        "package_version": __version__,
        "seed": resolved_config.get("seed"),
        "config": resolved_config,
        "artifacts": artifacts,
    }
    target = out_dir / "manifest.json"
    target.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return target
