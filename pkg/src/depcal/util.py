"""Shared helpers: canonical JSON, content hashing, CRC-32C, small numerics."""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any

_SEMVER_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)(?:[-+].*)?$")


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and no whitespace; stable across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(obj: Any, prefix: str = "") -> str:
    digest = hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
    return f"{prefix}{digest[:16]}" if prefix else digest[:16]


def stable_seed(*parts: Any) -> int:
    """Derive a 64-bit RNG seed from arbitrary JSON-serializable parts."""
    digest = hashlib.sha256(canonical_json(list(parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def parse_semver(version: str) -> tuple[int, int, int]:
    m = _SEMVER_RE.match(version.strip())
    if not m:
        raise ValueError(f"not a semver string: {version!r}")
    return int(m.group(1)), int(m.group(2)), int(m.group(3))


def semver_delta(old: str, new: str) -> str:
    """Classify a version change as major, minor, or patch."""
    o, n = parse_semver(old), parse_semver(new)
    if o[0] != n[0]:
        return "major"
    if o[1] != n[1]:
        return "minor"
    return "patch"


# CRC-32C (Castagnoli, reflected polynomial 0x82F63B78). zlib.crc32 uses the
# IEEE polynomial, so the table is built here once at import.
_CRC32C_TABLE = []
for _i in range(256):
    _c = _i
    for _ in range(8):
        _c = (_c >> 1) ^ 0x82F63B78 if _c & 1 else _c >> 1
    _CRC32C_TABLE.append(_c)


def crc32c(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc = _CRC32C_TABLE[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF
