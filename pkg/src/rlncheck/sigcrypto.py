"""Node identities, signatures, certificates, PRF, and Merkle commitments.

Signatures are Ed25519 (fixed 64-byte signatures, 32-byte keys); key
material can be derived deterministically from a seeded ``random.Random``
so whole simulations replay byte-identically.  The hash is SHA-256
truncated to a configurable width (160 bits by default).  The PRF is
HMAC-SHA256 keyed with a public seed; coefficient derivation maps its
output into Z_q^* by rejection sampling over successive counters.

The Merkle tree here is the plain binary commitment (leaf/interior
domain separation, odd node promoted unchanged); the coding-verification
tree with validity signatures at interior nodes lives in ``pipcore``.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

SIG_BYTES = 64
PK_BYTES = 32

_LEAF_PREFIX = b"\x00"
_INTERIOR_PREFIX = b"\x01"
_CERT_CONTEXT = b"rlncheck-node-cert-v1:"


def hash_bytes(data: bytes, h_bytes: int = 20) -> bytes:
    """SHA-256 truncated to h_bytes (the configured digest width |h|)."""
    return hashlib.sha256(data).digest()[:h_bytes]


def prf(seed: bytes, data: bytes) -> bytes:
    """Keyed PRF on the public seed: HMAC-SHA256(seed, data), 32 bytes."""
    if len(seed) < 16:
        raise ValueError("seed must be at least 16 bytes")
    return hmac.new(seed, data, hashlib.sha256).digest()


def prf_to_field(seed: bytes, data: bytes, q: int) -> int:
    """Map PRF output into Z_q^* by rejection sampling on counters.

    Each attempt masks an HMAC digest down to q's bit length; values
    outside [1, q) are rejected and the counter bumped, so acceptance
    probability is at least ~1/2 per attempt and the result is
    (computationally) uniform over Z_q^*.
    """
    bits = q.bit_length()
    nbytes = (bits + 7) // 8
    mask = (1 << bits) - 1
    counter = 0
    while True:
        digest = prf(seed, data + counter.to_bytes(4, "big"))
        while len(digest) < nbytes:
            counter += 1
            digest += prf(seed, data + counter.to_bytes(4, "big"))
        x = int.from_bytes(digest[:nbytes], "big") & mask
        if 0 < x < q:
            return x
        counter += 1


@dataclass
class NodeIdentity:
    """A node's id, Ed25519 keypair, and (optionally) its certificate.

    ``sk`` is present only on the owning node; ``cert`` is attached once
    an authority has certified the key.
    """

    node_id: bytes
    pk: bytes
    sk: bytes | None = None
    cert: "Certificate | None" = None


@dataclass(frozen=True)
class Certificate:
    """Authority signature binding (pk, node_id) plus a priority label."""

    node_id: bytes
    pk: bytes
    priority: bytes
    sig: bytes


def keygen(rng: random.Random, node_id: bytes = b"") -> NodeIdentity:
    """Fresh Ed25519 keypair; key bytes drawn from the supplied rng."""
    sk = rng.randbytes(32)
    pk = Ed25519PrivateKey.from_private_bytes(sk).public_key().public_bytes_raw()
    return NodeIdentity(node_id=node_id, pk=pk, sk=sk)


def sign(sk: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(sk).sign(message)


def verify(pk: bytes, message: bytes, sig: bytes) -> bool:
    """Deterministic verification; False on any malformed input."""
    try:
        Ed25519PublicKey.from_public_bytes(pk).verify(sig, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def _cert_message(pk: bytes, node_id: bytes, priority: bytes) -> bytes:
    return (
        _CERT_CONTEXT
        + len(pk).to_bytes(2, "big") + pk
        + len(node_id).to_bytes(2, "big") + node_id
        + len(priority).to_bytes(2, "big") + priority
    )


def certify(authority_sk: bytes, pk: bytes, node_id: bytes, priority: bytes = b"") -> Certificate:
    """Authority signature over exactly (pk, node_id, priority)."""
    sig = sign(authority_sk, _cert_message(pk, node_id, priority))
    return Certificate(node_id=node_id, pk=pk, priority=priority, sig=sig)


def verify_cert(cert: Certificate, pk: bytes, node_id: bytes, authority_pk: bytes) -> bool:
    if cert.pk != pk or cert.node_id != node_id:
        return False
    return verify(authority_pk, _cert_message(pk, node_id, cert.priority), cert.sig)


# ---------------------------------------------------------------------------
# Generic Merkle commitment


def _leaf_hash(leaf: bytes, h_bytes: int) -> bytes:
    return hash_bytes(_LEAF_PREFIX + leaf, h_bytes)


def _interior_hash(left: bytes, right: bytes, h_bytes: int) -> bytes:
    return hash_bytes(_INTERIOR_PREFIX + left + right, h_bytes)


def merkle_commit(leaves: list[bytes], h_bytes: int = 20) -> bytes:
    """Root of the binary commitment tree over the given leaves.

    Odd node at any level is promoted unchanged to the next level, so
    no padding leaf exists to confuse opening indices.
    """
    if not leaves:
        raise ValueError("merkle_commit requires at least one leaf")
    level = [_leaf_hash(leaf, h_bytes) for leaf in leaves]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(_interior_hash(level[i], level[i + 1], h_bytes))
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def merkle_open(leaves: list[bytes], index: int, h_bytes: int = 20) -> list[tuple[int, bytes]]:
    """Authentication path for one leaf.

    Returns a list of (side, digest) pairs bottom-up, where side 0
    means the sibling sits on the left and 1 on the right.  Levels at
    which the node was promoted (no sibling) contribute no entry.
    """
    if not leaves:
        raise ValueError("merkle_open requires at least one leaf")
    if not 0 <= index < len(leaves):
        raise IndexError(f"leaf index {index} out of range for {len(leaves)} leaves")
    level = [_leaf_hash(leaf, h_bytes) for leaf in leaves]
    pos = index
    path: list[tuple[int, bytes]] = []
    while len(level) > 1:
        if pos % 2 == 0 and pos + 1 < len(level):
            path.append((1, level[pos + 1]))
        elif pos % 2 == 1:
            path.append((0, level[pos - 1]))
        # else: unpaired node, promoted without a sibling
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(_interior_hash(level[i], level[i + 1], h_bytes))
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
        pos //= 2
    return path


def merkle_verify(
    root: bytes,
    leaf: bytes,
    index: int,
    path: list[tuple[int, bytes]],
    h_bytes: int = 20,
) -> bool:
    """Recompute bottom-up from the leaf and compare against the root."""
    node = _leaf_hash(leaf, h_bytes)
    for side, sibling in path:
        if side == 0:
            node = _interior_hash(sibling, node, h_bytes)
        elif side == 1:
            node = _interior_hash(node, sibling, h_bytes)
        else:
            return False
    return node == root
