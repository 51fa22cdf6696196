"""Canonical serialization and digest helpers.

State digests are SHA-256 hashes of a canonical JSON serialization of latent
state, never of rendered pixels.  Canonical form: sorted keys, compact
separators, UTF-8.  Latent state contains only ints, strings, bools and
lists, so the canonical form is platform-stable.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest_payload(payload: Any) -> str:
    """256-bit hex digest of a canonical JSON payload."""
    return sha256_hex(canonical_dumps(payload))
