import hashlib


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from a master seed and a path of names/indices.

    Uses SHA-256 over the textual parts, so the result does not depend on
    Python's hash randomisation or on the order jobs are scheduled in.
    """
    text = "/".join([str(int(master))] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1
