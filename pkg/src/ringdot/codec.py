"""Canonical encodings: hex big integers and byte-stable JSON."""

from __future__ import annotations

import hashlib
import json
import random
from typing import Any


def to_hex(x: int) -> str:
    """Lowercase hex without leading zeros; ``"0"`` for zero."""
    if x < 0:
        raise ValueError("negative integers have no canonical hex form")
    return format(x, "x")


def from_hex(s: str) -> int:
    if not s or s != s.lower() or s.startswith("0x"):
        raise ValueError(f"not a canonical hex integer: {s!r}")
    if len(s) > 1 and s[0] == "0":
        raise ValueError(f"leading zero in hex integer: {s!r}")
    return int(s, 16)


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_ints(obj: Any) -> Any:
    """Replace every int leaf (not bool) with its canonical hex string."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, int):
        return to_hex(int(obj))
    if isinstance(obj, dict):
        return {str(k): encode_ints(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode_ints(v) for v in obj]
    return obj


def decode_ints(obj: Any) -> Any:
    if isinstance(obj, str):
        return from_hex(obj)
    if isinstance(obj, dict):
        return {k: decode_ints(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode_ints(v) for v in obj]
    return obj


def encode_payload(fields: dict) -> bytes:
    return canonical_json(encode_ints(fields))


def decode_payload(payload: bytes) -> dict:
    return decode_ints(json.loads(payload.decode("utf-8")))


def derive_seed(*parts: Any) -> int:
    """Stable 64-bit seed from arbitrary printable parts."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def derive_rng(*parts: Any) -> random.Random:
    return random.Random(derive_seed(*parts))
