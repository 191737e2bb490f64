"""Deterministic binary encoding and the project-wide 256-bit hash.

Layout (one tag byte, then a body)::

    N                       None
    T / F                   booleans
    I <u32 len> <ascii>     integers, decimal text
    S <u32 len> <utf-8>     strings
    B <u32 len> <raw>       byte strings
    E <u32 len> <utf-8>     enum members, by value
    d <u32 len> <iso>       civil dates
    t <u32 len> <iso>       date-times
    L <u32 n> item*n        lists/tuples in given order; sets sorted first
    D <u32 n> (k v)*n       mappings, keys sorted
    R <type> <u32 n> v*n    records (dataclasses), fields in declared order

Every variable-size element is length-prefixed, so distinct values never
share an encoding.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import struct
from datetime import date, datetime

from .types import InformedConsent, Ppa, PpaIntegrity
from ..errors import IncompletePpa

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)


def H(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def _sized(tag: bytes, body: bytes) -> bytes:
    return tag + _u32(len(body)) + body


def _set_key(item):
    if isinstance(item, enum.Enum):
        return (0, str(item.value), b"")
    if isinstance(item, str):
        return (0, item, b"")
    label = getattr(item, "label", None)
    if isinstance(label, str):
        return (1, label, canonical_encode(item))
    if dataclasses.is_dataclass(item):
        return (2, "", canonical_encode(item))
    return (3, "", canonical_encode(item))


def canonical_encode(value) -> bytes:
    if value is None:
        return b"N"
    if value is True:
        return b"T"
    if value is False:
        return b"F"
    if isinstance(value, enum.Enum):
        return _sized(b"E", str(value.value).encode())
    if isinstance(value, int):
        return _sized(b"I", str(value).encode("ascii"))
    if isinstance(value, str):
        return _sized(b"S", value.encode("utf-8"))
    if isinstance(value, (bytes, bytearray)):
        return _sized(b"B", bytes(value))
    if isinstance(value, datetime):
        return _sized(b"t", value.isoformat().encode("ascii"))
    if isinstance(value, date):
        return _sized(b"d", value.isoformat().encode("ascii"))
    if isinstance(value, (list, tuple)):
        return b"L" + _u32(len(value)) + b"".join(canonical_encode(v) for v in value)
    if isinstance(value, (set, frozenset)):
        items = sorted(value, key=_set_key)
        return b"L" + _u32(len(items)) + b"".join(canonical_encode(v) for v in items)
    if isinstance(value, dict):
        keys = sorted(value, key=str)
        return b"D" + _u32(len(keys)) + b"".join(
            canonical_encode(k) + canonical_encode(value[k]) for k in keys
        )
    if dataclasses.is_dataclass(value):
        fields = dataclasses.fields(value)
        tag = _sized(b"", type(value).__name__.encode())
        return b"R" + tag + _u32(len(fields)) + b"".join(
            canonical_encode(getattr(value, f.name)) for f in fields
        )
    raise TypeError(f"no canonical encoding for {type(value).__name__}")


def digest(value) -> bytes:
    return H(canonical_encode(value))


def hash_ppa(ppa: Ppa) -> PpaIntegrity:
    if not ppa.complete:
        missing = [n for n in ("pc", "prc", "roc", "icc") if not getattr(ppa, n)]
        raise IncompletePpa(f"PPA cannot be created; empty components: {', '.join(missing)}")
    h_pc = H(canonical_encode(list(ppa.pc)))
    h_prc = H(canonical_encode(list(ppa.prc)))
    h_roc = H(canonical_encode(list(ppa.roc)))
    h_icc = H(canonical_encode(list(ppa.icc)))
    return PpaIntegrity(h_pc, h_prc, h_roc, h_icc, H(h_pc + h_prc + h_roc + h_icc))


def consent_slots(ic: InformedConsent) -> int:
    """32-byte storage words needed to hold one consent record."""
    return -(-len(canonical_encode(ic)) // 32)
