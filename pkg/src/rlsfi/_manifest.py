"""Shared manifest-plus-payload container plumbing.

The HRTF, design, and filter files all use the same idiom: a JSON manifest
next to a raw little-endian binary payload it names. Writers are canonical
(sorted keys, two-space indent, trailing newline) so that load/save
round-trips are byte-identical.
"""

import json
import os

from .errors import FormatError


def dump_manifest(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_container(manifest_path, doc, payload):
    manifest_path = os.fspath(manifest_path)
    data_path = os.path.join(os.path.dirname(manifest_path), doc["data_file"])
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(dump_manifest(doc))
    with open(data_path, "wb") as fh:
        fh.write(payload)


def read_manifest(manifest_path, expected_format, expected_version):
    manifest_path = os.fspath(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read manifest {manifest_path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(
            f"malformed manifest {manifest_path}: {exc.msg}", byte_offset=exc.pos
        ) from exc
    if not isinstance(doc, dict):
        raise FormatError(f"manifest {manifest_path} is not a JSON object", byte_offset=0)
    got_format = doc.get("format")
    if got_format != expected_format:
        raise FormatError(
            f"manifest {manifest_path}: format {got_format!r}, expected {expected_format!r}",
            byte_offset=0,
        )
    got_version = doc.get("version")
    if got_version != expected_version:
        raise FormatError(
            f"manifest {manifest_path}: version {got_version!r}, expected {expected_version}",
            byte_offset=0,
        )
    return doc


def read_payload(manifest_path, doc, expected_bytes):
    manifest_path = os.fspath(manifest_path)
    name = doc.get("data_file")
    if not isinstance(name, str) or not name:
        raise FormatError(f"manifest {manifest_path} does not name a data file", byte_offset=0)
    data_path = os.path.join(os.path.dirname(manifest_path), name)
    try:
        with open(data_path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read payload {data_path}: {exc}") from exc
    if len(payload) != expected_bytes:
        raise FormatError(
            f"payload {data_path}: expected {expected_bytes} bytes, got {len(payload)}",
            byte_offset=min(len(payload), expected_bytes),
        )
    return payload
