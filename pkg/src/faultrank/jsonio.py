"""Schema-versioned JSONL files.

Every artifact is one record per line; the first line is a header record
{"schema": <name>, "version": <int>, "config": {...}} carrying the resolved
configuration that produced the file. Readers reject mismatched schema
names and unknown versions, and cite 1-based file line numbers on parse
errors. Serialization sorts keys, so identical records give identical
bytes.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Iterator, Optional

SCHEMA_VERSION = 1

SCHEMAS = ("tasks", "candidates", "reports", "labeled", "scores")


class SchemaError(ValueError):
    """Bad header, wrong schema name, unknown version, or malformed line."""


def dumps(record: Any) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str, schema: str, records: Iterable[dict],
                config: Optional[dict] = None) -> int:
    """Write header + records; returns the number of data records."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(make_header(schema, config)) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")
            count += 1
    return count


def make_header(schema: str, config: Optional[dict] = None) -> dict:
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}")
    header = {"schema": schema, "version": SCHEMA_VERSION}
    if config is not None:
        header["config"] = config
    return header


class JsonlWriter:
    """Incremental writer that flushes each record (crash loses at most the
    in-flight batch)."""

    def __init__(self, path: str, schema: str, config: Optional[dict] = None):
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write(dumps(make_header(schema, config)) + "\n")
        self._fh.flush()
        self.count = 0

    def write(self, record: dict) -> None:
        self._fh.write(dumps(record) + "\n")
        self._fh.flush()
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "JsonlWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_jsonl(path: str, schema: str) -> tuple[dict, list[dict]]:
    """Read and validate one JSONL artifact; returns (header, records)."""
    header: Optional[dict] = None
    records: list[dict] = []
    for lineno, payload in _parse_lines(path):
        if header is None:
            header = _check_header(path, payload, schema, lineno)
        else:
            records.append(payload)
    if header is None:
        raise SchemaError(f"{path}: empty file, expected a {schema!r} header")
    return header, records


def iter_jsonl(path: str, schema: str) -> Iterator[dict]:
    """Streaming variant of read_jsonl; yields data records only."""
    header = None
    for lineno, payload in _parse_lines(path):
        if header is None:
            header = _check_header(path, payload, schema, lineno)
        else:
            yield payload


def _parse_lines(path: str) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from exc
            if not isinstance(payload, dict):
                raise SchemaError(f"{path}: line {lineno} is not a JSON object")
            yield lineno, payload


def _check_header(path: str, payload: dict, schema: str, lineno: int) -> dict:
    if "schema" not in payload or "version" not in payload:
        raise SchemaError(
            f"{path}: line {lineno} must be a header record with schema/version"
        )
    if payload["schema"] != schema:
        raise SchemaError(
            f"{path}: schema mismatch: expected {schema!r}, found {payload['schema']!r}"
        )
    if payload["version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: unsupported {schema} schema version: expected "
            f"{SCHEMA_VERSION}, found {payload['version']}"
        )
    return payload
