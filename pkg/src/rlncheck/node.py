"""The per-node engine: verify parents, code, emit, attest, adjudicate.

A node ingests one packet per parent per round, runs the full check
pipeline (attest signature, epoch binding, validity signature, coding
verification, helper token), then codes over its required set with
PRF-derived coefficients and assembles the outgoing packet:

    E, sigma, test token, helper token, epoch reference, sender id,
    attest signature over all preceding bytes.

Failures never abort a round; each parent gets a verdict and coding
proceeds over the verified parents (a degraded round is the caller's
policy decision).  The attest token makes any recorded violation
provable to a third party: ``adjudicate`` re-runs the same pipeline on
a self-contained misbehavior proof.
"""

from __future__ import annotations

import bisect
import enum
import random
from dataclasses import dataclass, field

from . import gf, pipcore, sigcrypto, validity
from .gf import CodedVector
from .pipcore import (
    ChallengeContext,
    ChallengeProof,
    LogPipTestToken,
    ParentInput,
    PipTestToken,
    Protocol,
    Violation,
    ViolationKind,
)
from .profiles import Profile
from .validity import SourceEpochParams
from .wire import DecodeError, Reader, Writer

_COEFF_CONTEXT = b"rlncheck-coeff-v1"


@dataclass(frozen=True)
class EpochRef:
    """Binds a packet to one transmission epoch: (k, master signature)."""

    k: int
    master_sig: bytes


@dataclass(frozen=True)
class Packet:
    E: CodedVector
    sigma: int
    test_token: PipTestToken | LogPipTestToken
    helper: bytes
    epoch_ref: EpochRef
    sender_id: bytes
    attest: bytes


# ---------------------------------------------------------------------------
# Coefficient derivation


def derive_coefficient(
    seed: bytes,
    parent_id: bytes,
    node_id: bytes,
    child_id: bytes | None,
    epoch_pk_bytes: bytes,
    q: int,
) -> int:
    """The prescribed coding coefficient for (parent -> node [-> child]).

    PRF input is the length-prefixed tuple of ids plus the epoch public
    key, so coefficients differ across epochs and (when enabled) per
    child; output is mapped into Z_q^* and is never zero.
    """
    if not parent_id or not node_id:
        raise ValueError("parent_id and node_id must be non-empty")
    w = Writer()
    w.raw(_COEFF_CONTEXT)
    w.var_bytes(parent_id).var_bytes(node_id)
    w.var_bytes(child_id if child_id is not None else b"")
    w.u64(len(epoch_pk_bytes)).raw(epoch_pk_bytes)
    return sigcrypto.prf_to_field(seed, w.getvalue(), q)


# ---------------------------------------------------------------------------
# Required-set policies


class PolicyKind(enum.Enum):
    ALL = "all"
    SPECIFIC = "specific"
    THRESHOLD = "threshold"
    SUBSET = "subset"
    PRIORITY = "priority"


@dataclass(frozen=True)
class RequiredSetPolicy:
    kind: PolicyKind
    members: frozenset = frozenset()  # SPECIFIC / SUBSET
    threshold: int = 0  # THRESHOLD / SUBSET
    min_high: int = 0  # PRIORITY
    min_total: int = 0  # PRIORITY
    high_label: bytes = b"high"

    @staticmethod
    def all_parents() -> "RequiredSetPolicy":
        return RequiredSetPolicy(kind=PolicyKind.ALL)

    @staticmethod
    def specific(members) -> "RequiredSetPolicy":
        return RequiredSetPolicy(kind=PolicyKind.SPECIFIC, members=frozenset(members))

    @staticmethod
    def threshold(d: int) -> "RequiredSetPolicy":
        if d < 1:
            raise ValueError("threshold must be >= 1")
        return RequiredSetPolicy(kind=PolicyKind.THRESHOLD, threshold=d)

    @staticmethod
    def subset(members, d: int) -> "RequiredSetPolicy":
        return RequiredSetPolicy(
            kind=PolicyKind.SUBSET, members=frozenset(members), threshold=d
        )

    @staticmethod
    def priority(min_high: int, min_total: int) -> "RequiredSetPolicy":
        return RequiredSetPolicy(
            kind=PolicyKind.PRIORITY, min_high=min_high, min_total=min_total
        )


def policy_check(
    policy: RequiredSetPolicy,
    claimed_parents: list[tuple[bytes, bytes, sigcrypto.Certificate | None]],
    authority_pk: bytes,
    declared_parents: frozenset | None = None,
) -> Violation | None:
    """Check a claimed parent list (id, pk, cert) against the policy.

    Membership policies compare against the declared registry or the
    policy's member set; counting policies additionally require a valid
    certificate for every parent that is counted.
    """
    claimed_ids = {pid for pid, _, _ in claimed_parents}
    if len(claimed_ids) != len(claimed_parents):
        return Violation(ViolationKind.POLICY_VIOLATION, b"", "duplicate claimed parent")

    def certified() -> list[tuple[bytes, sigcrypto.Certificate]]:
        good = []
        for pid, pk, cert in claimed_parents:
            if cert is None or not sigcrypto.verify_cert(cert, pk, pid, authority_pk):
                return []
            good.append((pid, cert))
        return good

    if policy.kind is PolicyKind.ALL:
        want = declared_parents if declared_parents is not None else frozenset()
        if claimed_ids != set(want):
            return Violation(ViolationKind.POLICY_VIOLATION, b"", "must code over all parents")
        return None
    if policy.kind is PolicyKind.SPECIFIC:
        if not set(policy.members) <= claimed_ids:
            return Violation(ViolationKind.POLICY_VIOLATION, b"", "required parent set not covered")
        return None
    if policy.kind is PolicyKind.THRESHOLD:
        good = certified()
        if len(good) < policy.threshold:
            return Violation(
                ViolationKind.POLICY_VIOLATION, b"",
                f"{len(good)} certified parents, need {policy.threshold}",
            )
        return None
    if policy.kind is PolicyKind.SUBSET:
        if not set(policy.members) <= claimed_ids:
            return Violation(ViolationKind.POLICY_VIOLATION, b"", "required subset not covered")
        good = certified()
        if len(good) < policy.threshold:
            return Violation(
                ViolationKind.POLICY_VIOLATION, b"",
                f"{len(good)} certified parents, need {policy.threshold}",
            )
        return None
    if policy.kind is PolicyKind.PRIORITY:
        good = certified()
        high = sum(1 for _, cert in good if cert.priority == policy.high_label)
        if len(good) < policy.min_total:
            return Violation(
                ViolationKind.POLICY_VIOLATION, b"",
                f"{len(good)} certified parents, need {policy.min_total}",
            )
        if high < policy.min_high:
            return Violation(
                ViolationKind.POLICY_VIOLATION, b"",
                f"{high} high-priority parents, need {policy.min_high}",
            )
        return None
    raise ValueError(f"unknown policy kind {policy.kind}")


# ---------------------------------------------------------------------------
# Packet serialization (canonical field order; attest covers all prior bytes)


def packet_signed_bytes(pkt: Packet, params: SourceEpochParams, h_bytes: int = 20) -> bytes:
    """Everything the attest signature covers, in canonical order."""
    w = Writer()
    w.u16(pkt.E.n).u16(pkt.E.m)
    for c in pkt.E.chunks:
        w.uint(c, params.q_bytes)
    w.uint(pkt.sigma, params.p_bytes)
    w.raw(pipcore.serialize_token(pkt.test_token, params, h_bytes))
    w.raw(pkt.helper)
    w.u64(pkt.epoch_ref.k).raw(pkt.epoch_ref.master_sig)
    w.var_bytes(pkt.sender_id)
    return w.getvalue()


def serialize_packet(pkt: Packet, params: SourceEpochParams, h_bytes: int = 20) -> bytes:
    return packet_signed_bytes(pkt, params, h_bytes) + pkt.attest


def deserialize_packet(data: bytes, params: SourceEpochParams, h_bytes: int = 20) -> Packet:
    """Parse a canonical packet; raises DecodeError (never crashes)."""
    r = Reader(data)
    n = r.u16()
    m = r.u16()
    chunks = [r.uint(params.q_bytes) for _ in range(n + m)]
    if any(c >= params.q for c in chunks):
        raise DecodeError("chunk out of field range", r.pos)
    sigma = r.uint(params.p_bytes)
    token = pipcore.parse_token(r, params, h_bytes)
    helper = r.take(sigcrypto.SIG_BYTES)
    k = r.u64()
    master_sig = r.take(sigcrypto.SIG_BYTES)
    sender_id = r.var_bytes()
    attest = r.take(sigcrypto.SIG_BYTES)
    r.expect_end()
    return Packet(
        E=CodedVector(payload=tuple(chunks[:n]), coding_vector=tuple(chunks[n:])),
        sigma=sigma,
        test_token=token,
        helper=helper,
        epoch_ref=EpochRef(k=k, master_sig=master_sig),
        sender_id=sender_id,
        attest=attest,
    )


def attest_packet(sk: bytes, packet_bytes: bytes) -> bytes:
    return sigcrypto.sign(sk, packet_bytes)


def verify_attest(pk: bytes, packet_bytes: bytes, sig: bytes) -> bool:
    return sigcrypto.verify(pk, packet_bytes, sig)


# ---------------------------------------------------------------------------
# Node state and the per-round protocol


@dataclass
class ParentInfo:
    pk: bytes
    cert: sigcrypto.Certificate | None = None
    required_set: frozenset = frozenset()  # the parent's own required set (its parents)
    grandparent_pks: dict = field(default_factory=dict)


@dataclass
class NodeState:
    identity: sigcrypto.NodeIdentity
    seed: bytes
    authority_pk: bytes
    master_pk: bytes
    profile: Profile
    protocol: Protocol = Protocol.PIP
    policy: RequiredSetPolicy = field(default_factory=RequiredSetPolicy.all_parents)
    per_child_coeffs: bool = False
    params: SourceEpochParams | None = None
    parents: dict = field(default_factory=dict)  # parent_id -> ParentInfo
    buffers: dict = field(default_factory=dict)  # parent_id -> verified Packet
    current_tree: pipcore.MerkleTreeState | None = None
    received_log: list = field(default_factory=list)  # all verified CodedVectors
    verdict_log: list = field(default_factory=list)

    @property
    def node_id(self) -> bytes:
        return self.identity.node_id

    def required_set(self) -> frozenset:
        if self.policy.kind is PolicyKind.SPECIFIC:
            return frozenset(self.policy.members)
        return frozenset(self.parents)

    def register_parent(self, parent_id: bytes, info: "ParentInfo") -> None:
        self.parents[parent_id] = info

    def enter_epoch(self, params: SourceEpochParams) -> None:
        """Exactly one epoch is active; buffered packets do not carry over."""
        self.params = params
        self.buffers.clear()
        self.current_tree = None


def expected_coefficient(
    state: NodeState, grandparent_id: bytes, parent_id: bytes
) -> int:
    """The coefficient this node expects its parent to have used."""
    assert state.params is not None
    child = state.node_id if state.per_child_coeffs else None
    return derive_coefficient(
        state.seed, grandparent_id, parent_id, child,
        state.params.epoch_pk_bytes(), state.params.q,
    )


def verify_incoming(state: NodeState, pkt: Packet) -> Violation | None:
    """Run the receive-side check pipeline on one parent packet.

    Order: attest signature, epoch binding, validity signature, coding
    verification (full-token protocol only; Merkle challenges are
    driven separately), helper token.  Returns the first Violation, or
    None when the packet is good.
    """
    params = state.params
    sender = pkt.sender_id
    if params is None:
        return Violation(ViolationKind.BAD_EPOCH, sender, "no active epoch")
    info = state.parents.get(sender)
    if info is None:
        return Violation(ViolationKind.POLICY_VIOLATION, sender, "unregistered parent")

    signed = packet_signed_bytes(pkt, params, state.profile.h_bytes)
    if not verify_attest(info.pk, signed, pkt.attest):
        return Violation(ViolationKind.BAD_ATTEST, sender)

    if pkt.epoch_ref.k != params.k or not sigcrypto.verify(
        state.master_pk, params.epoch_pk_bytes(), pkt.epoch_ref.master_sig
    ):
        return Violation(ViolationKind.BAD_EPOCH, sender, f"epoch {pkt.epoch_ref.k}")

    if not validity.verify_validity(params, pkt.E, pkt.sigma):
        return Violation(ViolationKind.POLLUTED_PACKET, sender)

    if state.protocol is Protocol.PIP and info.required_set:
        if not isinstance(pkt.test_token, PipTestToken):
            return Violation(ViolationKind.MISSING_ENTRY, sender, "wrong token type")
        expected = {
            gp: derive_coefficient(
                state.seed, gp, sender,
                state.node_id if state.per_child_coeffs else None,
                params.epoch_pk_bytes(), params.q,
            )
            for gp in info.required_set
        }
        v = pipcore.pip_verif_test(
            pkt.sigma, pkt.test_token, sender,
            set(info.required_set), info.grandparent_pks, expected, params,
        )
        if v is not None:
            return v

    return pipcore.check_helper(
        all(c == 0 for c in pkt.E.coding_vector),
        pkt.sigma, pkt.helper, info.pk, sender, state.node_id, params,
    )


def challenge_parent(
    state: NodeState,
    pkt: Packet,
    sender_tree: pipcore.MerkleTreeState | None,
    sender_sk: bytes | None,
    t: int,
    rng: random.Random,
) -> list[tuple[bytes, ChallengeProof | None, Violation | None]]:
    """Issue t Merkle challenges on a sender's packet and verify responses.

    ``sender_tree``/``sender_sk`` stand in for the request round-trip:
    the responder opens its retained tree and signs each response.  A
    missing response (no retained tree) counts as a violation, which is
    how the simulator treats refusal to answer.  Challenged parents are
    sampled without replacement from the sender's required set.
    """
    params = state.params
    assert params is not None
    info = state.parents[pkt.sender_id]
    if not isinstance(pkt.test_token, LogPipTestToken) or not info.required_set:
        return []
    targets = sorted(info.required_set)
    picks = rng.sample(targets, k=min(t, len(targets)))
    ctx = ChallengeContext(
        sender_id=pkt.sender_id,
        sender_pk=info.pk,
        receiver_id=state.node_id,
        packet_sigma=pkt.sigma,
        sender_helper_sig=pkt.helper,
        packet_coding_zero=all(c == 0 for c in pkt.E.coding_vector),
        params=params,
        h_bytes=state.profile.h_bytes,
    )
    results = []
    for target in picks:
        proof = None
        if sender_tree is not None:
            idx = next(
                (i for i, inp in enumerate(sender_tree.inputs) if inp.parent_id == target),
                None,
            )
            if idx is None:
                # Cheating tree without a leaf for the challenged parent: the
                # responder can only open some other leaf, which then fails the
                # helper-signature check for the challenged parent.
                idx = min(
                    bisect.bisect_left([i.parent_id for i in sender_tree.inputs], target),
                    len(sender_tree.inputs) - 1,
                )
            proof = pipcore.logpip_respond(sender_tree, idx, sender_sk)
        if proof is None:
            v = Violation(ViolationKind.BAD_MERKLE_PATH, pkt.sender_id, "no response")
        else:
            v = pipcore.logpip_verify(
                proof, pkt.test_token, ctx, target, info.grandparent_pks[target],
                expected_coefficient(state, target, pkt.sender_id),
            )
        results.append((target, proof, v))
    return results


@dataclass
class OutgoingDraft:
    """Per-round output before the per-child helper/attest are attached."""

    E: CodedVector
    sigma: int
    test_token: PipTestToken | LogPipTestToken
    epoch_ref: EpochRef
    sender_id: bytes
    coeffs: dict
    degraded: bool


def process_round(
    state: NodeState, incoming: list[Packet], protocol: Protocol | None = None
) -> tuple[OutgoingDraft | None, list[tuple[bytes, Violation | None]]]:
    """Ingest one round of parent packets and prepare the outgoing packet.

    Every incoming packet gets a verdict; verified packets are buffered
    (latest per parent).  Once every required parent has a verified
    packet buffered, the node codes over all of them with its
    prescribed coefficients and builds the protocol's test token.  If a
    required parent's packet failed checks this round, the draft is
    built over the verified parents only and marked degraded.
    """
    if protocol is not None:
        state.protocol = protocol
    params = state.params
    if params is None:
        raise ValueError("node has no active epoch")

    verdicts: list[tuple[bytes, Violation | None]] = []
    for pkt in incoming:
        v = verify_incoming(state, pkt)
        verdicts.append((pkt.sender_id, v))
        if v is None:
            state.buffers[pkt.sender_id] = pkt
            state.received_log.append(pkt.E)
    state.verdict_log.extend(verdicts)

    required = state.required_set()
    available = [rp for rp in sorted(required) if rp in state.buffers]
    if not available:
        return None, verdicts
    degraded = len(available) < len(required)

    coeffs = {}
    inputs = []
    vectors = []
    for rp in available:
        buffered = state.buffers[rp]
        # Shared coefficients by default; the per-child flag would move this
        # into finalize_packet with one draft per child.
        a = derive_coefficient(
            state.seed, rp, state.node_id, None, params.epoch_pk_bytes(), params.q
        )
        coeffs[rp] = a
        vectors.append(buffered.E)
        inputs.append(ParentInput(rp, buffered.sigma, buffered.helper, a))

    E = gf.linear_combine(vectors, [coeffs[rp] for rp in available], params.q)
    sigma = validity.combine_validity(
        [i.sigma for i in inputs], [i.coeff for i in inputs], params
    )

    if state.protocol is Protocol.LOGPIP:
        token, tree = pipcore.logpip_build(inputs, params, state.profile.h_bytes)
        state.current_tree = tree
    else:
        token = pipcore.pip_combine(inputs)
        state.current_tree = None

    draft = OutgoingDraft(
        E=E,
        sigma=sigma,
        test_token=token,
        epoch_ref=EpochRef(k=params.k, master_sig=params.master_sig),
        sender_id=state.node_id,
        coeffs=coeffs,
        degraded=degraded,
    )
    return draft, verdicts


def finalize_packet(state: NodeState, draft: OutgoingDraft, child_id: bytes) -> Packet:
    """Attach the per-child helper token and the attest signature."""
    assert state.identity.sk is not None and state.params is not None
    helper = pipcore.make_helper_token(
        state.identity.sk, draft.sigma, state.node_id, child_id, state.params
    )
    pkt = Packet(
        E=draft.E,
        sigma=draft.sigma,
        test_token=draft.test_token,
        helper=helper,
        epoch_ref=draft.epoch_ref,
        sender_id=draft.sender_id,
        attest=b"",
    )
    signed = packet_signed_bytes(pkt, state.params, state.profile.h_bytes)
    return Packet(
        E=pkt.E, sigma=pkt.sigma, test_token=pkt.test_token, helper=pkt.helper,
        epoch_ref=pkt.epoch_ref, sender_id=pkt.sender_id,
        attest=attest_packet(state.identity.sk, signed),
    )


# ---------------------------------------------------------------------------
# Misbehavior proofs and adjudication


class Verdict(enum.Enum):
    GUILTY = "guilty"
    INNOCENT = "innocent"
    INADMISSIBLE = "inadmissible"


@dataclass(frozen=True)
class Adjudication:
    verdict: Verdict
    violation: Violation | None = None
    reason: str = ""


@dataclass(frozen=True)
class MisbehaviorProof:
    """Self-contained evidence: packet, context, and (Log-PIP) transcript."""

    packet_bytes: bytes
    sender_id: bytes
    sender_pk: bytes
    sender_cert: sigcrypto.Certificate
    receiver_id: bytes
    protocol: Protocol
    required_set: frozenset
    parent_pks: dict
    parent_certs: dict
    params: SourceEpochParams
    seed: bytes
    per_child: bool
    transcript: tuple = ()  # (challenged parent_id, serialized ChallengeProof) pairs
    h_bytes: int = 20


def build_misbehavior_proof(
    state: NodeState,
    pkt: Packet,
    transcript: list[tuple[bytes, ChallengeProof]] | None = None,
) -> MisbehaviorProof:
    """Package a suspicious packet (and any challenge transcript) as evidence."""
    assert state.params is not None
    info = state.parents[pkt.sender_id]
    serialized = tuple(
        (pid, pipcore.serialize_proof(pf, state.params, state.profile.h_bytes))
        for pid, pf in (transcript or [])
    )
    return MisbehaviorProof(
        packet_bytes=serialize_packet(pkt, state.params, state.profile.h_bytes),
        sender_id=pkt.sender_id,
        sender_pk=info.pk,
        sender_cert=info.cert,
        receiver_id=state.node_id,
        protocol=state.protocol,
        required_set=frozenset(info.required_set),
        parent_pks=dict(info.grandparent_pks),
        parent_certs={},
        params=state.params,
        seed=state.seed,
        per_child=state.per_child_coeffs,
        transcript=serialized,
        h_bytes=state.profile.h_bytes,
    )


def adjudicate(
    proof: MisbehaviorProof, authority_pk: bytes, master_pk: bytes
) -> Adjudication:
    """Re-run the verification pipeline on a misbehavior proof.

    Guilty requires an independent reproduction of a Violation from
    admissible evidence; a bad attest signature (or an unverifiable
    challenge response) makes the proof inadmissible rather than the
    accused guilty, so honest nodes cannot be framed with doctored
    packets.
    """
    params = proof.params
    if not sigcrypto.verify(master_pk, params.epoch_pk_bytes(), params.master_sig):
        return Adjudication(Verdict.INADMISSIBLE, reason="bad epoch parameters")
    if proof.sender_cert is None or not sigcrypto.verify_cert(
        proof.sender_cert, proof.sender_pk, proof.sender_id, authority_pk
    ):
        return Adjudication(Verdict.INADMISSIBLE, reason="uncertified sender key")
    try:
        pkt = deserialize_packet(proof.packet_bytes, params, proof.h_bytes)
    except DecodeError as e:
        return Adjudication(Verdict.INADMISSIBLE, reason=f"undecodable packet: {e}")
    if pkt.sender_id != proof.sender_id:
        return Adjudication(Verdict.INADMISSIBLE, reason="sender mismatch")

    signed = packet_signed_bytes(pkt, params, proof.h_bytes)
    if not verify_attest(proof.sender_pk, signed, pkt.attest):
        return Adjudication(Verdict.INADMISSIBLE, reason="attest does not verify")
    if pkt.epoch_ref.k != params.k or not sigcrypto.verify(
        master_pk, params.epoch_pk_bytes(), pkt.epoch_ref.master_sig
    ):
        return Adjudication(Verdict.INADMISSIBLE, reason="packet bound to a different epoch")

    if not validity.verify_validity(params, pkt.E, pkt.sigma):
        return Adjudication(
            Verdict.GUILTY,
            Violation(ViolationKind.POLLUTED_PACKET, proof.sender_id),
        )

    def expected(gp: bytes) -> int:
        child = proof.receiver_id if proof.per_child else None
        return derive_coefficient(
            proof.seed, gp, proof.sender_id, child, params.epoch_pk_bytes(), params.q
        )

    if proof.protocol is Protocol.PIP and proof.required_set:
        if not isinstance(pkt.test_token, PipTestToken):
            return Adjudication(
                Verdict.GUILTY,
                Violation(ViolationKind.MISSING_ENTRY, proof.sender_id, "wrong token type"),
            )
        v = pipcore.pip_verif_test(
            pkt.sigma, pkt.test_token, proof.sender_id,
            set(proof.required_set), proof.parent_pks,
            {gp: expected(gp) for gp in proof.required_set}, params,
        )
        if v is not None:
            return Adjudication(Verdict.GUILTY, v)

    if proof.protocol is Protocol.LOGPIP:
        if not isinstance(pkt.test_token, LogPipTestToken):
            return Adjudication(
                Verdict.GUILTY,
                Violation(ViolationKind.BAD_MERKLE_PATH, proof.sender_id, "wrong token type"),
            )
        ctx = ChallengeContext(
            sender_id=proof.sender_id,
            sender_pk=proof.sender_pk,
            receiver_id=proof.receiver_id,
            packet_sigma=pkt.sigma,
            sender_helper_sig=pkt.helper,
            packet_coding_zero=all(c == 0 for c in pkt.E.coding_vector),
            params=params,
            h_bytes=proof.h_bytes,
        )
        for pid, proof_bytes in proof.transcript:
            try:
                challenge = pipcore.parse_proof(proof_bytes, params, proof.h_bytes)
            except DecodeError as e:
                return Adjudication(Verdict.INADMISSIBLE, reason=f"undecodable response: {e}")
            body = pipcore.response_signed_bytes(
                challenge, pkt.test_token.root, params.p_bytes, params.q_bytes
            )
            if not sigcrypto.verify(proof.sender_pk, body, challenge.response_sig):
                return Adjudication(Verdict.INADMISSIBLE, reason="unsigned challenge response")
            if pid not in proof.parent_pks:
                return Adjudication(Verdict.INADMISSIBLE, reason="challenge outside required set")
            v = pipcore.logpip_verify(
                challenge, pkt.test_token, ctx, pid, proof.parent_pks[pid], expected(pid)
            )
            if v is not None:
                return Adjudication(Verdict.GUILTY, v)

    v = pipcore.check_helper(
        all(c == 0 for c in pkt.E.coding_vector),
        pkt.sigma, pkt.helper, proof.sender_pk, proof.sender_id, proof.receiver_id, params,
    )
    if v is not None:
        return Adjudication(Verdict.GUILTY, v)
    return Adjudication(Verdict.INNOCENT)
