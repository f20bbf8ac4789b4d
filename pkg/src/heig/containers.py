"""Versioned array containers and stage manifests.

Checkpoints are zip archives of ``.npy`` members plus a JSON metadata
member, written with frozen zip timestamps so identical content produces
identical bytes.  Stage manifests record input/output hashes, the seed,
and config digest, making pipeline reruns hash-verifiable.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import zipfile
from typing import Mapping, Optional

import numpy as np

CONTAINER_VERSION = 1
META_MEMBER = "__meta__.json"


def save_container(path: str, arrays: Mapping[str, np.ndarray], meta: dict) -> None:
    """Write arrays + metadata to a deterministic zip container."""
    meta = dict(meta)
    meta["container_version"] = CONTAINER_VERSION
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        _writestr(zf, META_MEMBER, json.dumps(meta, sort_keys=True).encode("utf-8"))
        for key in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[key]))
            _writestr(zf, key + ".npy", buf.getvalue())


def load_container(path: str) -> tuple[dict[str, np.ndarray], dict]:
    """Read back a container written by :func:`save_container`."""
    arrays: dict[str, np.ndarray] = {}
    with zipfile.ZipFile(path, "r") as zf:
        meta = json.loads(zf.read(META_MEMBER).decode("utf-8"))
        for name in zf.namelist():
            if name == META_MEMBER:
                continue
            if not name.endswith(".npy"):
                raise ValueError(f"unexpected container member {name!r} in {path}")
            with zf.open(name) as member:
                arrays[name[: -len(".npy")]] = np.lib.format.read_array(member)
    return arrays, meta


def _writestr(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def digest_of(obj) -> str:
    """Stable digest of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def write_manifest(
    out_dir: str,
    stage: str,
    inputs: Mapping[str, str],
    outputs: Mapping[str, str],
    seed: Optional[int],
    config_digest: str,
) -> str:
    """Write ``manifest.json`` for a pipeline stage and return its path.

    ``inputs``/``outputs`` map file names to their sha256 hex digests.
    """
    from heig import __version__

    manifest = {
        "format_version": 1,
        "stage": stage,
        "inputs": dict(sorted(inputs.items())),
        "outputs": dict(sorted(outputs.items())),
        "seed": seed,
        "config_digest": config_digest,
        "package_version": __version__,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def hash_files(paths: Mapping[str, str]) -> dict[str, str]:
    """Hash a {name: path} mapping into {name: sha256}."""
    return {name: sha256_file(path) for name, path in paths.items()}
