"""Coding-verification tokens: full test tokens and Merkle-challenge trees.

Two interchangeable verification protocols over the same per-parent
data (coefficient, parent validity signature, parent helper token):

* PIP -- the full token concatenates one entry per required parent, and
  a child checks every entry plus the homomorphic combination against
  the packet's validity signature.  Detection of a skipped/miscoded
  parent is certain; token size grows linearly with the parent count.

* Log-PIP -- the sender commits to the same entries in a modified
  Merkle tree whose interior nodes carry both a hash and the partial
  homomorphic combination of the leaves below; the token is just the
  root hash.  A child challenges random parents and verifies opened
  paths, detecting a cheat on any single parent with probability t/d
  per round of t challenges.

Helper tokens bind a validity signature to a specific (sender,
receiver) pair so a colluding node cannot re-use another node's data.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from . import sigcrypto
from .validity import SourceEpochParams, combine_validity
from .wire import DecodeError, Reader, Writer


class Protocol(enum.Enum):
    PIP = "pip"
    LOGPIP = "logpip"
    NONE = "none"


class ViolationKind(enum.Enum):
    MISSING_ENTRY = "MissingEntry"
    BAD_HELPER_SIG = "BadHelperSig"
    ZERO_COEFFICIENT = "ZeroCoefficient"
    WRONG_COEFFICIENT = "WrongCoefficient"
    SIGNATURE_COMBINE_MISMATCH = "SignatureCombineMismatch"
    BAD_MERKLE_PATH = "BadMerklePath"
    ROOT_SIG_MISMATCH = "RootSigMismatch"
    BAD_ATTEST = "BadAttest"
    POLLUTED_PACKET = "PollutedPacket"
    HELPER_ON_ZERO = "HelperOnZero"
    BAD_EPOCH = "BadEpoch"
    POLICY_VIOLATION = "PolicyViolation"


@dataclass(frozen=True)
class Violation:
    """One failed check: what kind, whose fault, and free-form detail."""

    kind: ViolationKind
    culprit: bytes
    detail: str = ""
    evidence: bytes = b""

    def __str__(self) -> str:
        who = self.culprit.decode("utf-8", "replace")
        return f"{self.kind.value}({who}{': ' + self.detail if self.detail else ''})"


class ParentInput(NamedTuple):
    """Per-parent token material: (id, sigma, helper signature, coefficient)."""

    parent_id: bytes
    sigma: int
    helper_sig: bytes
    coeff: int


# ---------------------------------------------------------------------------
# Helper tokens


def helper_context(sender_id: bytes, receiver_id: bytes) -> bytes:
    """The transfer-binding context string signed into a helper token."""
    return b"from " + sender_id + b" to " + receiver_id


def make_helper_token(
    sender_sk: bytes,
    sigma: int,
    sender_id: bytes,
    receiver_id: bytes,
    params: SourceEpochParams,
) -> bytes:
    """Sender's signature over (sigma || "from <sender> to <receiver>")."""
    msg = params.sigma_to_bytes(sigma) + helper_context(sender_id, receiver_id)
    return sigcrypto.sign(sender_sk, msg)


def verify_helper(
    sender_pk: bytes,
    sigma: int,
    sender_id: bytes,
    receiver_id: bytes,
    helper_sig: bytes,
    params: SourceEpochParams,
) -> bool:
    if not 0 < sigma < params.p:
        return False
    msg = params.sigma_to_bytes(sigma) + helper_context(sender_id, receiver_id)
    return sigcrypto.verify(sender_pk, msg, helper_sig)


def check_helper(
    coding_vector_zero: bool,
    sigma: int,
    helper_sig: bytes,
    sender_pk: bytes,
    sender_id: bytes,
    receiver_id: bytes,
    params: SourceEpochParams,
) -> Violation | None:
    """A helper must be a valid signature on sigma and not cover a zero packet."""
    if coding_vector_zero or sigma % params.p in (0, 1):
        return Violation(ViolationKind.HELPER_ON_ZERO, sender_id)
    if not verify_helper(sender_pk, sigma, sender_id, receiver_id, helper_sig, params):
        return Violation(ViolationKind.BAD_HELPER_SIG, sender_id)
    return None


# ---------------------------------------------------------------------------
# PIP: full test token


@dataclass(frozen=True)
class PipTestToken:
    entries: tuple[ParentInput, ...]  # canonical order: sorted by parent_id

    def entry_map(self) -> dict[bytes, ParentInput]:
        return {e.parent_id: e for e in self.entries}


def pip_combine(parent_inputs: list[ParentInput]) -> PipTestToken:
    """Assemble the full token, one entry per parent, in canonical order."""
    ids = [p.parent_id for p in parent_inputs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate parent_id in token inputs")
    return PipTestToken(entries=tuple(sorted(parent_inputs, key=lambda e: e.parent_id)))


def pip_verif_test(
    packet_sigma: int,
    token: PipTestToken,
    sender_id: bytes,
    required_set: set[bytes],
    parent_pks: dict[bytes, bytes],
    expected_coeffs: dict[bytes, int],
    params: SourceEpochParams,
) -> Violation | None:
    """Check a sender's full token against its required set.

    Returns None when every check passes, otherwise the Violation for
    the first failed check: an entry per required parent must exist,
    each helper must verify under that parent's key for this sender,
    each coefficient must be the nonzero prescribed one, and the
    homomorphic combination of all entries must equal the packet's
    validity signature.  Never raises on adversarial tokens.
    """
    entries = token.entry_map()
    for rp in sorted(required_set):
        if rp not in entries:
            return Violation(ViolationKind.MISSING_ENTRY, sender_id, rp.decode("utf-8", "replace"))
    for rp in sorted(required_set):
        e = entries[rp]
        if not verify_helper(parent_pks[rp], e.sigma, rp, sender_id, e.helper_sig, params):
            return Violation(ViolationKind.BAD_HELPER_SIG, sender_id, rp.decode("utf-8", "replace"))
        if e.coeff % params.q == 0:
            return Violation(ViolationKind.ZERO_COEFFICIENT, sender_id, rp.decode("utf-8", "replace"))
        if e.coeff % params.q != expected_coeffs[rp] % params.q:
            return Violation(ViolationKind.WRONG_COEFFICIENT, sender_id, rp.decode("utf-8", "replace"))
    combined = combine_validity(
        [e.sigma for e in token.entries], [e.coeff for e in token.entries], params
    )
    if combined != packet_sigma:
        return Violation(ViolationKind.SIGNATURE_COMBINE_MISMATCH, sender_id)
    return None


# ---------------------------------------------------------------------------
# Log-PIP: modified Merkle tree

_TREE_LEAF = b"\x00"
_TREE_INTERIOR = b"\x01"
_RESPONSE_CONTEXT = b"rlncheck-challenge-response-v1:"


@dataclass(frozen=True)
class TreeNode:
    digest: bytes
    sigma: int


@dataclass(frozen=True)
class LogPipTestToken:
    root: bytes


@dataclass(frozen=True)
class MerkleTreeState:
    """Everything the sender must retain to answer challenges.

    ``levels[0]`` holds the first-level nodes (leaf hash paired with
    sigma^coeff); the last level is the single root whose sigma equals
    the homomorphic combination over all parents.
    """

    inputs: tuple[ParentInput, ...]  # canonical order; index = challenge index
    levels: tuple[tuple[TreeNode, ...], ...]
    p_bytes: int
    q_bytes: int
    h_bytes: int

    @property
    def root(self) -> TreeNode:
        return self.levels[-1][0]


def _leaf_bytes(inp: ParentInput, p_bytes: int, q_bytes: int) -> bytes:
    return (
        inp.sigma.to_bytes(p_bytes, "big")
        + inp.helper_sig
        + inp.coeff.to_bytes(q_bytes, "big")
    )


def _node_bytes(node: TreeNode, p_bytes: int) -> bytes:
    return node.digest + node.sigma.to_bytes(p_bytes, "big")


def _hash_pair(left: TreeNode, right: TreeNode, p_bytes: int, h_bytes: int) -> bytes:
    return sigcrypto.hash_bytes(
        _TREE_INTERIOR + _node_bytes(left, p_bytes) + _node_bytes(right, p_bytes), h_bytes
    )


def logpip_build(
    parent_inputs: list[ParentInput],
    params: SourceEpochParams,
    h_bytes: int = 20,
) -> tuple[LogPipTestToken, MerkleTreeState]:
    """Build the commitment tree over per-parent data.

    Leaves are sigma || helper || coefficient; first-level nodes pair
    the leaf hash with sigma^coeff; each interior node hashes its two
    children and multiplies their sigmas, so the root carries the
    validity signature of the outgoing packet.  An unpaired node is
    promoted unchanged, preserving that product for any parent count.
    """
    if not parent_inputs:
        raise ValueError("logpip_build requires at least one parent")
    ids = [p.parent_id for p in parent_inputs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate parent_id in tree inputs")
    inputs = tuple(sorted(parent_inputs, key=lambda e: e.parent_id))
    pw, qw = params.p_bytes, params.q_bytes

    level = [
        TreeNode(
            digest=sigcrypto.hash_bytes(_TREE_LEAF + _leaf_bytes(inp, pw, qw), h_bytes),
            sigma=pow(inp.sigma, inp.coeff % params.q, params.p),
        )
        for inp in inputs
    ]
    levels = [tuple(level)]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            left, right = level[i], level[i + 1]
            nxt.append(
                TreeNode(
                    digest=_hash_pair(left, right, pw, h_bytes),
                    sigma=(left.sigma * right.sigma) % params.p,
                )
            )
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
        levels.append(tuple(level))

    state = MerkleTreeState(
        inputs=inputs, levels=tuple(levels), p_bytes=pw, q_bytes=qw, h_bytes=h_bytes
    )
    return LogPipTestToken(root=state.root.digest), state


@dataclass(frozen=True)
class ProofLevel:
    """Sibling at one tree level: side 0 = left of the path node,
    1 = right, 2 = path node was promoted (no sibling)."""

    side: int
    digest: bytes = b""
    sigma: int = 0


@dataclass(frozen=True)
class ChallengeProof:
    parent_index: int
    parent_id: bytes
    leaf: ParentInput
    path: tuple[ProofLevel, ...]
    response_sig: bytes = b""


def logpip_respond(
    state: MerkleTreeState, parent_index: int, responder_sk: bytes | None = None
) -> ChallengeProof:
    """Open the path for one parent; optionally sign the response.

    The signature (over the root and the opened data) is what lets a
    challenger later prove misbehavior to a third party without being
    able to forge a failing response.
    """
    if not 0 <= parent_index < len(state.inputs):
        raise IndexError(f"parent index {parent_index} out of range 0..{len(state.inputs) - 1}")
    path: list[ProofLevel] = []
    pos = parent_index
    for level in state.levels[:-1]:
        if pos % 2 == 0 and pos + 1 < len(level):
            sib = level[pos + 1]
            path.append(ProofLevel(side=1, digest=sib.digest, sigma=sib.sigma))
        elif pos % 2 == 1:
            sib = level[pos - 1]
            path.append(ProofLevel(side=0, digest=sib.digest, sigma=sib.sigma))
        else:
            path.append(ProofLevel(side=2))
        pos //= 2
    proof = ChallengeProof(
        parent_index=parent_index,
        parent_id=state.inputs[parent_index].parent_id,
        leaf=state.inputs[parent_index],
        path=tuple(path),
    )
    if responder_sk is not None:
        body = response_signed_bytes(proof, state.root.digest, state.p_bytes, state.q_bytes)
        proof = ChallengeProof(
            parent_index=proof.parent_index,
            parent_id=proof.parent_id,
            leaf=proof.leaf,
            path=proof.path,
            response_sig=sigcrypto.sign(responder_sk, body),
        )
    return proof


def response_signed_bytes(proof: ChallengeProof, root: bytes, p_bytes: int, q_bytes: int) -> bytes:
    """Bytes covered by the responder's signature: root plus opened data."""
    w = Writer()
    w.raw(_RESPONSE_CONTEXT).raw(root)
    w.u16(proof.parent_index).var_bytes(proof.parent_id)
    w.uint(proof.leaf.sigma, p_bytes).raw(proof.leaf.helper_sig)
    w.uint(proof.leaf.coeff, q_bytes)
    w.u8(len(proof.path))
    for lvl in proof.path:
        w.u8(lvl.side)
        if lvl.side != 2:
            w.raw(lvl.digest).uint(lvl.sigma, p_bytes)
    return w.getvalue()


@dataclass(frozen=True)
class ChallengeContext:
    """What a challenger already knows when verifying an opened path."""

    sender_id: bytes
    sender_pk: bytes
    receiver_id: bytes
    packet_sigma: int
    sender_helper_sig: bytes
    packet_coding_zero: bool
    params: SourceEpochParams
    h_bytes: int = 20


def logpip_verify(
    proof: ChallengeProof,
    token: LogPipTestToken,
    ctx: ChallengeContext,
    parent_id: bytes,
    parent_pk: bytes,
    expected_coeff: int,
) -> Violation | None:
    """Verify one opened challenge path against the committed root.

    Checks, in order: the opened leaf belongs to the challenged parent
    (its helper verifies under that parent's key, for this sender) with
    the nonzero prescribed coefficient; the recomputed root hash equals
    the token; the recomputed root sigma equals the packet's validity
    signature; and the sender's own helper token passes check_helper.
    Never raises on adversarial proofs.
    """
    params = ctx.params
    pw, qw = params.p_bytes, params.q_bytes
    leaf = proof.leaf
    if proof.parent_id != parent_id or not verify_helper(
        parent_pk, leaf.sigma, parent_id, ctx.sender_id, leaf.helper_sig, params
    ):
        return Violation(ViolationKind.BAD_HELPER_SIG, ctx.sender_id, parent_id.decode("utf-8", "replace"))
    if leaf.coeff % params.q == 0:
        return Violation(ViolationKind.ZERO_COEFFICIENT, ctx.sender_id, parent_id.decode("utf-8", "replace"))
    if leaf.coeff % params.q != expected_coeff % params.q:
        return Violation(ViolationKind.WRONG_COEFFICIENT, ctx.sender_id, parent_id.decode("utf-8", "replace"))

    node = TreeNode(
        digest=sigcrypto.hash_bytes(_TREE_LEAF + _leaf_bytes(leaf, pw, qw), ctx.h_bytes),
        sigma=pow(leaf.sigma, leaf.coeff % params.q, params.p),
    )
    for lvl in proof.path:
        if lvl.side == 2:
            continue
        if lvl.side not in (0, 1) or not 0 < lvl.sigma < params.p:
            return Violation(ViolationKind.BAD_MERKLE_PATH, ctx.sender_id, "malformed level")
        sib = TreeNode(digest=lvl.digest, sigma=lvl.sigma)
        left, right = (sib, node) if lvl.side == 0 else (node, sib)
        node = TreeNode(
            digest=_hash_pair(left, right, pw, ctx.h_bytes),
            sigma=(left.sigma * right.sigma) % params.p,
        )
    if node.digest != token.root:
        return Violation(ViolationKind.BAD_MERKLE_PATH, ctx.sender_id)
    if node.sigma != ctx.packet_sigma:
        return Violation(ViolationKind.ROOT_SIG_MISMATCH, ctx.sender_id)

    return check_helper(
        ctx.packet_coding_zero,
        ctx.packet_sigma,
        ctx.sender_helper_sig,
        ctx.sender_pk,
        ctx.sender_id,
        ctx.receiver_id,
        params,
    )


# ---------------------------------------------------------------------------
# Serialization

_TAG_PIP = 0
_TAG_LOGPIP = 1


def serialize_token(token: PipTestToken | LogPipTestToken, params: SourceEpochParams, h_bytes: int = 20) -> bytes:
    w = Writer()
    if isinstance(token, PipTestToken):
        w.u8(_TAG_PIP).u16(len(token.entries))
        for e in token.entries:
            w.var_bytes(e.parent_id)
            w.uint(e.coeff % params.q, params.q_bytes)
            w.uint(e.sigma, params.p_bytes)
            w.raw(e.helper_sig)
    else:
        w.u8(_TAG_LOGPIP).raw(token.root)
    return w.getvalue()


def parse_token(r: Reader, params: SourceEpochParams, h_bytes: int = 20) -> PipTestToken | LogPipTestToken:
    tag = r.u8()
    if tag == _TAG_PIP:
        count = r.u16()
        entries = []
        for _ in range(count):
            pid = r.var_bytes()
            coeff = r.uint(params.q_bytes)
            sigma = r.uint(params.p_bytes)
            helper = r.take(sigcrypto.SIG_BYTES)
            entries.append(ParentInput(pid, sigma, helper, coeff))
        return PipTestToken(entries=tuple(entries))
    if tag == _TAG_LOGPIP:
        return LogPipTestToken(root=r.take(h_bytes))
    raise DecodeError(f"unknown token tag {tag}", r.pos - 1)


def serialize_proof(proof: ChallengeProof, params: SourceEpochParams, h_bytes: int = 20) -> bytes:
    w = Writer()
    w.u16(proof.parent_index).var_bytes(proof.parent_id)
    w.uint(proof.leaf.sigma, params.p_bytes).raw(proof.leaf.helper_sig)
    w.uint(proof.leaf.coeff, params.q_bytes)
    w.u8(len(proof.path))
    for lvl in proof.path:
        w.u8(lvl.side)
        if lvl.side != 2:
            w.raw(lvl.digest).uint(lvl.sigma, params.p_bytes)
    w.raw(proof.response_sig if proof.response_sig else bytes(sigcrypto.SIG_BYTES))
    return w.getvalue()


def parse_proof(data: bytes, params: SourceEpochParams, h_bytes: int = 20) -> ChallengeProof:
    r = Reader(data)
    parent_index = r.u16()
    parent_id = r.var_bytes()
    sigma = r.uint(params.p_bytes)
    helper = r.take(sigcrypto.SIG_BYTES)
    coeff = r.uint(params.q_bytes)
    n_levels = r.u8()
    path = []
    for _ in range(n_levels):
        side = r.u8()
        if side == 2:
            path.append(ProofLevel(side=2))
        else:
            digest = r.take(h_bytes)
            sig_val = r.uint(params.p_bytes)
            path.append(ProofLevel(side=side, digest=digest, sigma=sig_val))
    response_sig = r.take(sigcrypto.SIG_BYTES)
    r.expect_end()
    return ChallengeProof(
        parent_index=parent_index,
        parent_id=parent_id,
        leaf=ParentInput(parent_id, sigma, helper, coeff),
        path=tuple(path),
        response_sig=response_sig,
    )


# ---------------------------------------------------------------------------
# Size accounting


def token_size_bits(protocol: Protocol, d: int, sigma_bits: int, sig_bits: int, h_bits: int) -> int:
    """Closed-form verification overhead in bits for d required parents.

    PIP counts the full token plus the sender's own helper token:
    d*(|sigma| + |sig|) + |sig|.  Log-PIP counts the root, one opened
    leaf, and the per-level path data: |h| + |sigma| + |sig| +
    2*|sigma|*ceil(log2 d).  The ceiling convention matches the number
    of sibling levels actually serialized for a balanced tree; the
    d=1 tree has no levels, so the log term is 0.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if protocol is Protocol.PIP:
        return d * (sigma_bits + sig_bits) + sig_bits
    if protocol is Protocol.LOGPIP:
        return h_bits + sigma_bits + sig_bits + 2 * sigma_bits * math.ceil(math.log2(d))
    raise ValueError(f"no size formula for protocol {protocol}")
