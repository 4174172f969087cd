"""Stable seed derivation so nested components get independent streams."""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Hash arbitrary labels into a 64-bit seed, stable across runs."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
