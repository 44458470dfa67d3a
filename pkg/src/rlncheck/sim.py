"""Topology generation, Byzantine behaviors, and round-based simulation.

The transmission model: per epoch the source emits one fresh random
combination of its m originals to each of its children in round 1;
every other node re-codes each round once it has heard from every
required parent, sending the same packet to all children (shared
coefficients).  Under that schedule a node contributes at most one
degree of freedom per epoch, so the throughput a sink can reach is
min(min_cut, m) where min_cut is the max-flow with unit capacities on
both edges and interior nodes.

Byzantine behaviors cover throughput attacks that remain *valid*
(non-innovative coding, plain forwarding), protocol deviations that the
coding-verification tokens catch (skipped parents, zero or wrong
coefficients, forged token entries), and replay across epochs.

Simulations are deterministic per seed: identities, epoch parameters,
source combinations, challenge picks, and adversarial choices all
derive from the one seed.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field, replace

from . import gf, node as node_mod, pipcore, sigcrypto, validity
from .gf import CodedVector, Span
from .node import NodeState, ParentInfo, Packet, RequiredSetPolicy
from .pipcore import ParentInput, Protocol, Violation, ViolationKind
from .profiles import SIM, Profile


class Role(enum.Enum):
    SOURCE = "source"
    INTERIOR = "interior"
    SINK = "sink"


class BehaviorKind(enum.Enum):
    HONEST = "honest"  # Mode 3: forced correct coding
    NON_INNOVATIVE = "noninnovative"  # Mode 1: valid but adds nothing downstream
    FORWARD_ONLY = "forwardonly"  # Mode 2: routes one received packet
    SKIP_PARENT = "skipparent"
    ZERO_COEFFICIENT = "zerocoefficient"
    WRONG_COEFFICIENT = "wrongcoefficient"
    REPLAY_OLD = "replayold"
    FORGE_TOKEN = "forgetoken"


@dataclass(frozen=True)
class Behavior:
    kind: BehaviorKind
    target: int = 0  # index into the node's sorted required set, where applicable

    @staticmethod
    def honest() -> "Behavior":
        return Behavior(BehaviorKind.HONEST)


@dataclass
class NodeSpec:
    role: Role
    behavior: Behavior = field(default_factory=Behavior.honest)
    policy: RequiredSetPolicy = field(default_factory=RequiredSetPolicy.all_parents)


class InfeasibleTopologyError(Exception):
    pass


@dataclass
class Topology:
    """Directed acyclic transmission graph with per-node roles/behaviors."""

    nodes: dict[str, NodeSpec]
    edges: list[tuple[str, str]]
    source: str
    byzantine: list[str] = field(default_factory=list)

    def parents(self, name: str) -> list[str]:
        return sorted(u for u, v in self.edges if v == name)

    def children(self, name: str) -> list[str]:
        return sorted(v for u, v in self.edges if u == name)

    @property
    def sinks(self) -> list[str]:
        return sorted(n for n, spec in self.nodes.items() if spec.role is Role.SINK)

    def with_behavior(self, name: str, behavior: Behavior) -> "Topology":
        nodes = {
            n: NodeSpec(role=s.role, behavior=behavior if n == name else s.behavior, policy=s.policy)
            for n, s in self.nodes.items()
        }
        return Topology(nodes=nodes, edges=list(self.edges), source=self.source,
                        byzantine=list(self.byzantine))

    def validate(self) -> None:
        names = set(self.nodes)
        for u, v in self.edges:
            if u not in names or v not in names:
                raise ValueError(f"edge ({u},{v}) references unknown node")
        order = topological_order(self)
        if order is None:
            raise ValueError("topology contains a cycle")
        reach = reachable_from(self, self.source)
        for n, spec in self.nodes.items():
            if n != self.source and spec.role is not Role.SOURCE and n not in reach:
                raise ValueError(f"node {n} unreachable from source")


def topological_order(topo: Topology) -> list[str] | None:
    indeg = {n: 0 for n in topo.nodes}
    for _, v in topo.edges:
        indeg[v] += 1
    queue = deque(sorted(n for n, d in indeg.items() if d == 0))
    out = []
    children = {n: topo.children(n) for n in topo.nodes}
    while queue:
        u = queue.popleft()
        out.append(u)
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return out if len(out) == len(topo.nodes) else None


def reachable_from(topo: Topology, start: str) -> set[str]:
    seen = {start}
    stack = [start]
    children = {n: topo.children(n) for n in topo.nodes}
    while stack:
        u = stack.pop()
        for v in children[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def longest_path_length(topo: Topology) -> int:
    order = topological_order(topo)
    if order is None:
        raise ValueError("cyclic topology")
    dist = {n: 0 for n in topo.nodes}
    for u in order:
        for v in topo.children(u):
            dist[v] = max(dist[v], dist[u] + 1)
    return max(dist.values(), default=0)


# ---------------------------------------------------------------------------
# Max-flow / min-cut with unit capacities on edges and interior nodes


def _split_graph(topo: Topology, src: str, dst: str):
    """Arc-capacity map for the node-split graph.

    Interior node v becomes v_in -> v_out with capacity 1; src and dst
    are not split (the source owns all m degrees of freedom, the sink
    only collects).
    """
    cap: dict[tuple[str, str], int] = {}

    def inp(n: str) -> str:
        return n if n in (src, dst) else n + "#in"

    def outp(n: str) -> str:
        return n if n in (src, dst) else n + "#out"

    for n in topo.nodes:
        if n not in (src, dst):
            cap[(inp(n), outp(n))] = cap.get((inp(n), outp(n)), 0) + 1
    for u, v in topo.edges:
        cap[(outp(u), inp(v))] = cap.get((outp(u), inp(v)), 0) + 1
    return cap


def _max_flow(cap: dict[tuple[str, str], int], src: str, dst: str) -> tuple[int, dict]:
    """Edmonds-Karp on an arc-capacity dict; returns (value, residual)."""
    residual = dict(cap)
    adj: dict[str, set[str]] = {}
    for (u, v) in cap:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    flow = 0
    while True:
        parent: dict[str, str | None] = {src: None}
        queue = deque([src])
        while queue and dst not in parent:
            u = queue.popleft()
            for v in sorted(adj.get(u, ())):
                if v not in parent and residual.get((u, v), 0) > 0:
                    parent[v] = u
                    queue.append(v)
        if dst not in parent:
            return flow, residual
        v = dst
        while parent[v] is not None:
            u = parent[v]
            residual[(u, v)] = residual.get((u, v), 0) - 1
            residual[(v, u)] = residual.get((v, u), 0) + 1
            v = u
        flow += 1


def min_cut(topo: Topology, src: str, dst: str) -> int:
    """Max-flow value from src to dst, unit node/edge capacities."""
    if src not in topo.nodes or dst not in topo.nodes:
        raise ValueError("src/dst not in topology")
    if src == dst:
        return 0
    cap = _split_graph(topo, src, dst)
    value, _ = _max_flow(cap, src, dst)
    return value


def _cut_nodes(topo: Topology, src: str, dst: str) -> list[str]:
    """Interior nodes incident to the minimum cut, nearest first."""
    cap = _split_graph(topo, src, dst)
    _, residual = _max_flow(cap, src, dst)
    reach = {src}
    stack = [src]
    adj: dict[str, set[str]] = {}
    for (u, v) in cap:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in reach and residual.get((u, v), 0) > 0:
                reach.add(v)
                stack.append(v)
    candidates: list[str] = []
    for (u, v), c in cap.items():
        if c > 0 and u in reach and v not in reach:
            for endpoint in (u, v):
                name = endpoint.split("#")[0]
                if name not in (src, dst) and name not in candidates:
                    candidates.append(name)
    return candidates


def butterfly_topology() -> Topology:
    """The 7-node butterfly: two relays, a bottleneck chain, two sinks."""
    nodes = {
        "s": NodeSpec(role=Role.SOURCE),
        "r1": NodeSpec(role=Role.INTERIOR),
        "r2": NodeSpec(role=Role.INTERIOR),
        "n1": NodeSpec(role=Role.INTERIOR),
        "n1c": NodeSpec(role=Role.INTERIOR),
        "n2": NodeSpec(role=Role.SINK),
        "n3": NodeSpec(role=Role.SINK),
    }
    edges = [
        ("s", "r1"), ("s", "r2"),
        ("r1", "n1"), ("r2", "n1"),
        ("r1", "n2"), ("r2", "n3"),
        ("n1", "n1c"),
        ("n1c", "n2"), ("n1c", "n3"),
    ]
    topo = Topology(nodes=nodes, edges=edges, source="s", byzantine=["n1"])
    topo.validate()
    return topo


def random_topology(
    node_count: int,
    edge_count: int,
    target_min_cut: int,
    byzantine_count: int,
    rng_seed: int,
    max_retries: int = 40,
) -> Topology:
    """Layered random DAG adjusted until max-flow(source, sink) hits target.

    Byzantine nodes are chosen on a minimum cut (removal of the first
    one provably drops the max-flow).  Deterministic per seed; raises
    InfeasibleTopologyError when the parameters cannot be met within
    the retry budget.
    """
    if node_count < 4 or target_min_cut < 1:
        raise InfeasibleTopologyError("need at least 4 nodes and min-cut >= 1")
    rng = random.Random(rng_seed)
    for attempt in range(max_retries):
        topo = _random_topology_attempt(node_count, edge_count, target_min_cut, rng)
        if topo is None:
            continue
        byz = _place_byzantine(topo, byzantine_count)
        if byz is None:
            continue
        topo.byzantine = byz
        topo.validate()
        return topo
    raise InfeasibleTopologyError(
        f"could not build {node_count} nodes / {edge_count} edges / cut {target_min_cut}"
    )


def _random_topology_attempt(
    node_count: int, edge_count: int, target: int, rng: random.Random
) -> Topology | None:
    """One generation attempt: layered interior graph, exactly ``target``
    sink in-edges (which caps the max-flow at the target), then add
    upstream capacity until the flow reaches it."""
    src, dst = "s", "t"
    interior = [f"n{i:03d}" for i in range(node_count - 2)]
    if target > len(interior):
        return None
    n_layers = max(2, min(5, (node_count - 2) // 8))
    layer = {src: 0, dst: n_layers + 1}
    for name in interior:
        layer[name] = rng.randrange(1, n_layers + 1)

    # Sink tails: the target-many interior nodes feeding the sink, chosen
    # from the deepest layers so paths have somewhere to run.
    by_depth = sorted(interior, key=lambda n: (-layer[n], n))
    tails = sorted(rng.sample(by_depth[: max(target * 3, target)], target))

    pairs = [
        (u, v)
        for u in [src] + interior
        for v in interior
        if u != v and layer[u] < layer[v]
    ]
    rng.shuffle(pairs)
    budget = max(edge_count - target, 0)
    edges = set(pairs[:min(budget, len(pairs))])
    edges |= {(u, dst) for u in tails}

    # Repair: every interior node reachable from the source (dead-end
    # interiors are fine; only the sink must be fed at full capacity).
    children_map: dict[str, list[str]] = {}
    for u, v in edges:
        children_map.setdefault(u, []).append(v)
    seen, stack = {src}, [src]
    while stack:
        u = stack.pop()
        for v in children_map.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    for name in interior:
        if name not in seen:
            feeders = [u for u in [src] + interior if layer[u] < layer[name] and u in seen]
            if not feeders:
                feeders = [src]
            edges.add((rng.choice(feeders), name))
            seen.add(name)

    nodes = {src: NodeSpec(role=Role.SOURCE), dst: NodeSpec(role=Role.SINK)}
    for name in interior:
        nodes[name] = NodeSpec(role=Role.INTERIOR)
    topo = Topology(nodes=nodes, edges=sorted(edges), source=src)

    # The sink in-degree bounds the flow by `target`; raise the flow up to
    # it by feeding starving tails straight from the source.
    for _ in range(2 * target + 4):
        flow = min_cut(topo, src, dst)
        if flow == target:
            return topo
        added = False
        for u in tails:
            if (src, u) not in topo.edges:
                topo = Topology(
                    nodes=nodes, edges=sorted(set(topo.edges) | {(src, u)}), source=src
                )
                added = True
                break
        if not added:
            return None
    return None


def _place_byzantine(topo: Topology, count: int) -> list[str] | None:
    if count == 0:
        return []
    dst = topo.sinks[0]
    base = min_cut(topo, topo.source, dst)
    candidates = _cut_nodes(topo, topo.source, dst)
    chosen: list[str] = []
    for name in candidates:
        if len(chosen) == count:
            break
        if not chosen:
            # The first Byzantine sits where its silence provably costs a unit.
            pruned = Topology(
                nodes={n: s for n, s in topo.nodes.items() if n != name},
                edges=[e for e in topo.edges if name not in e],
                source=topo.source,
            )
            try:
                if min_cut(pruned, topo.source, dst) != base - 1:
                    continue
            except ValueError:
                continue
        chosen.append(name)
    return chosen if len(chosen) == count else None


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class DetectionEvent:
    round: int
    verifier: str
    culprit: str
    kind: ViolationKind


@dataclass
class TransmissionReport:
    sink_ranks: dict[str, int]
    detections: list[DetectionEvent]
    verdicts: list[tuple[int, str, str, Violation | None]]
    rounds: int
    decoded: dict[str, bool] = field(default_factory=dict)
    proofs: list = field(default_factory=list)  # MisbehaviorProof per detection

    def detected_culprits(self) -> set[str]:
        return {d.culprit for d in self.detections}


def default_rounds(topo: Topology, m: int) -> int:
    return longest_path_length(topo) + m


# ---------------------------------------------------------------------------
# Lightweight engine (no cryptography): used for throughput mode sweeps


def _lite_honest_coeffs(seed: bytes, parents: list[str], me: str, q: int) -> list[int]:
    return [
        node_mod.derive_coefficient(seed, p.encode(), me.encode(), None, b"lite", q)
        for p in parents
    ]


def _non_innovative_coeffs(
    received: dict, child_spans: list[Span], q: int, rng: random.Random
) -> list[int] | None:
    """Pick nonzero coefficients whose combination adds nothing downstream.

    Solves for coefficient vectors a with sum(a_i X_i) inside every
    non-empty child span, then samples that solution space for an
    all-nonzero choice, preferring one whose output vector is itself
    nonzero.  Returns the coefficients ordered by sorted parent key, or
    None when no child has received anything yet or no such choice
    exists (caller falls back to honest coding).
    """
    parents = sorted(received)
    vecs = [received[p] for p in parents]
    spans = [s for s in child_spans if s.dim > 0]
    if not spans or not vecs:
        return None
    rows = []
    for v in vecs:
        parts: list[int] = []
        for s in spans:
            parts.extend(s.residual(v.coding_vector))
        rows.append(parts)
    basis = gf.left_nullspace(rows, q)
    if not basis:
        return None
    fallback = None
    for _ in range(64):
        alpha = [0] * len(vecs)
        for b in basis:
            c = rng.randrange(q)
            alpha = [(a + c * bi) % q for a, bi in zip(alpha, b)]
        if any(a == 0 for a in alpha):
            continue
        out = gf.linear_combine(vecs, alpha, q)
        if not out.is_zero():
            return alpha
        if fallback is None:
            fallback = alpha
    return fallback


@dataclass
class _LiteNode:
    name: str
    buffers: dict = field(default_factory=dict)  # parent -> latest CodedVector
    history: Span | None = None
    emission: CodedVector | None = None


def _run_lite(
    topo: Topology, m: int, rounds: int, rng_seed: int, payload_chunks: int, profile: Profile
) -> TransmissionReport:
    q = profile.q
    rng = random.Random(rng_seed)
    seed = rng.randbytes(32)
    src = topo.source
    originals = gf.standard_basis_originals(
        [[rng.randrange(q) for _ in range(payload_chunks)] for _ in range(m)], q
    )

    states = {n: _LiteNode(name=n, history=Span(q, m)) for n in topo.nodes if n != src}
    parents = {n: topo.parents(n) for n in topo.nodes}
    children = {n: topo.children(n) for n in topo.nodes}
    adversary_rng = random.Random(rng.getrandbits(64))

    # deliveries[node] = list of (parent, vector) arriving this round
    deliveries: dict[str, list[tuple[str, CodedVector]]] = {n: [] for n in states}
    for c in children[src]:
        combo = [gf.random_nonzero(q, rng) for _ in range(m)]
        deliveries[c].append((src, gf.linear_combine(originals, combo, q)))

    for _ in range(rounds):
        for name in sorted(states):
            st = states[name]
            for parent, vec in deliveries[name]:
                st.buffers[parent] = vec
                st.history.add(vec.coding_vector)
        next_deliveries: dict[str, list[tuple[str, CodedVector]]] = {n: [] for n in states}

        # Honest/forwarding emissions first; omniscient adversaries observe them.
        pending_byz: list[str] = []
        for name in sorted(states):
            if topo.nodes[name].role is Role.SINK:
                continue
            st = states[name]
            req = parents[name]
            if not all(p in st.buffers for p in req):
                st.emission = None
                continue
            kind = topo.nodes[name].behavior.kind
            if kind is BehaviorKind.NON_INNOVATIVE:
                pending_byz.append(name)
                continue
            if kind is BehaviorKind.FORWARD_ONLY:
                st.emission = st.buffers[req[0]]
            else:
                coeffs = _lite_honest_coeffs(seed, req, name, q)
                st.emission = gf.linear_combine([st.buffers[p] for p in req], coeffs, q)

        for name in pending_byz:
            st = states[name]
            req = parents[name]
            spans = []
            for c in children[name]:
                view = states[c].history.copy()
                for other in parents[c]:
                    if other == name:
                        continue
                    other_em = states[other].emission if other in states else None
                    if other_em is not None:
                        view.add(other_em.coding_vector)
                spans.append(view)
            received = {p: st.buffers[p] for p in req}
            alphas = _non_innovative_coeffs(received, spans, q, adversary_rng)
            if alphas is None:
                alphas = _lite_honest_coeffs(seed, req, name, q)
            st.emission = gf.linear_combine([st.buffers[p] for p in req], alphas, q)

        for name in sorted(states):
            st = states[name]
            if st.emission is None:
                continue
            for c in children[name]:
                if c in states:
                    next_deliveries[c].append((name, st.emission))
        deliveries = next_deliveries

    ranks = {}
    decoded = {}
    for s in topo.sinks:
        ranks[s] = states[s].history.dim
        decoded[s] = False
    return TransmissionReport(
        sink_ranks=ranks, detections=[], verdicts=[], rounds=rounds, decoded=decoded
    )


# ---------------------------------------------------------------------------
# Full engine (cryptographic protocols)


@dataclass
class _SimNode:
    state: NodeState
    spec: NodeSpec
    emission: Packet | None = None  # shared-coefficient packet template of the round
    per_child: dict = field(default_factory=dict)  # child -> finalized Packet
    stored_old: dict = field(default_factory=dict)  # replay stash from epoch 1
    received_vectors: list = field(default_factory=list)


class Simulation:
    """Full-protocol run over a topology; deterministic per seed."""

    def __init__(
        self,
        topo: Topology,
        protocol: Protocol,
        m: int,
        rounds: int | None = None,
        rng_seed: int = 0,
        profile: Profile = SIM,
        payload_chunks: int = 2,
        epochs: int = 1,
        challenges: int = 1,
        collect_proofs: bool = False,
    ):
        topo.validate()
        self.topo = topo
        self.protocol = protocol
        self.m = m
        self.rounds = rounds if rounds is not None else default_rounds(topo, m)
        self.profile = profile
        self.payload_chunks = payload_chunks
        self.epochs = epochs
        self.challenges = challenges
        self.collect_proofs = collect_proofs
        self.rng = random.Random(rng_seed)
        self.report = TransmissionReport(
            sink_ranks={}, detections=[], verdicts=[], rounds=0
        )
        self._setup()

    def _setup(self) -> None:
        topo, rng = self.topo, self.rng
        self.seed = rng.randbytes(32)
        self.identities: dict[str, sigcrypto.NodeIdentity] = {}
        for name in sorted(topo.nodes):
            self.identities[name] = sigcrypto.keygen(rng, name.encode())
        self.master = self.identities[topo.source]
        for name, ident in self.identities.items():
            ident.cert = sigcrypto.certify(self.master.sk, ident.pk, ident.node_id)

        self.nodes: dict[str, _SimNode] = {}
        for name in sorted(topo.nodes):
            if name == topo.source:
                continue
            st = NodeState(
                identity=self.identities[name],
                seed=self.seed,
                authority_pk=self.master.pk,
                master_pk=self.master.pk,
                profile=self.profile,
                protocol=self.protocol,
                policy=topo.nodes[name].policy,
            )
            for p in topo.parents(name):
                p_ident = self.identities[p]
                st.register_parent(
                    p.encode(),
                    ParentInfo(
                        pk=p_ident.pk,
                        cert=p_ident.cert,
                        required_set=frozenset(gp.encode() for gp in topo.parents(p)),
                        grandparent_pks={
                            gp.encode(): self.identities[gp].pk for gp in topo.parents(p)
                        },
                    ),
                )
            self.nodes[name] = _SimNode(state=st, spec=topo.nodes[name])

        self.challenge_rng = random.Random(rng.getrandbits(64))
        self.adversary_rng = random.Random(rng.getrandbits(64))
        self.round_now = 0

    # -- source ------------------------------------------------------------

    def _source_packets(self, params: validity.SourceEpochParams) -> dict[str, Packet]:
        """One fresh random combination of the originals per source child."""
        out = {}
        src_id = self.topo.source.encode()
        for child in self.topo.children(self.topo.source):
            combo = [gf.random_nonzero(self.profile.q, self.rng) for _ in range(self.m)]
            E = gf.linear_combine(self.originals, combo, self.profile.q)
            sigma = validity.sign_validity(params, E)
            helper = pipcore.make_helper_token(
                self.master.sk, sigma, src_id, child.encode(), params
            )
            pkt = Packet(
                E=E, sigma=sigma,
                test_token=pipcore.PipTestToken(entries=()),
                helper=helper,
                epoch_ref=node_mod.EpochRef(k=params.k, master_sig=params.master_sig),
                sender_id=src_id,
                attest=b"",
            )
            signed = node_mod.packet_signed_bytes(pkt, params, self.profile.h_bytes)
            pkt = replace(pkt, attest=node_mod.attest_packet(self.master.sk, signed))
            out[child] = pkt
        return out

    # -- behaviors ----------------------------------------------------------

    def _behavior_emission(self, name: str, epoch: int) -> Packet | None:
        """Build this round's outgoing packet template per the node's behavior."""
        sim_node = self.nodes[name]
        st = sim_node.state
        spec = sim_node.spec
        kind = spec.behavior.kind
        params = st.params
        required = sorted(st.required_set())
        available = [rp for rp in required if rp in st.buffers]
        resolved = all(rp in st.buffers or rp in self.flagged[name] for rp in required)
        if not available or not resolved:
            return None

        if kind is BehaviorKind.REPLAY_OLD and epoch > 1:
            return sim_node.stored_old.get("template")

        adversarial = {
            BehaviorKind.SKIP_PARENT,
            BehaviorKind.ZERO_COEFFICIENT,
            BehaviorKind.WRONG_COEFFICIENT,
            BehaviorKind.FORWARD_ONLY,
            BehaviorKind.FORGE_TOKEN,
            BehaviorKind.NON_INNOVATIVE,
        }
        if kind not in adversarial or len(available) < 1:
            draft, _ = node_mod.process_round(st, [])
            if draft is None:
                return None
            return self._finalize_template(name, draft)

        target = required[spec.behavior.target % len(required)] if required else None
        inputs_all = {
            rp: ParentInput(
                rp, st.buffers[rp].sigma, st.buffers[rp].helper,
                node_mod.derive_coefficient(
                    self.seed, rp, st.node_id, None, params.epoch_pk_bytes(), params.q
                ),
            )
            for rp in available
        }

        if kind is BehaviorKind.SKIP_PARENT:
            kept = [inputs_all[rp] for rp in available if rp != target]
            if not kept:
                return None
            return self._assemble(name, kept)

        if kind is BehaviorKind.ZERO_COEFFICIENT:
            entries = [
                inp if inp.parent_id != target else ParentInput(
                    inp.parent_id, inp.sigma, inp.helper_sig, 0
                )
                for inp in inputs_all.values()
            ]
            return self._assemble(name, entries)

        if kind is BehaviorKind.WRONG_COEFFICIENT:
            entries = []
            for inp in inputs_all.values():
                if inp.parent_id == target:
                    wrong = (inp.coeff + 1) % params.q or 1
                    entries.append(ParentInput(inp.parent_id, inp.sigma, inp.helper_sig, wrong))
                else:
                    entries.append(inp)
            return self._assemble(name, entries)

        if kind is BehaviorKind.FORWARD_ONLY:
            first = available[0]
            fwd = st.buffers[first]
            # Claims honest coding in the token while actually routing.
            token_inputs = list(inputs_all.values())
            return self._assemble_raw(name, fwd.E, fwd.sigma, token_inputs)

        if kind is BehaviorKind.FORGE_TOKEN:
            entries = []
            for inp in inputs_all.values():
                if inp.parent_id == target:
                    fake = sigcrypto.sign(st.identity.sk, b"forged" + inp.parent_id)
                    entries.append(ParentInput(inp.parent_id, inp.sigma, fake, inp.coeff))
                else:
                    entries.append(inp)
            # Packet itself is coded honestly; only the token lies.
            honest = list(inputs_all.values())
            E = gf.linear_combine(
                [st.buffers[i.parent_id].E for i in honest], [i.coeff for i in honest],
                params.q,
            )
            sigma = validity.combine_validity(
                [i.sigma for i in honest], [i.coeff for i in honest], params
            )
            return self._assemble_raw(name, E, sigma, entries)

        if kind is BehaviorKind.NON_INNOVATIVE:
            alt = self._non_innovative_inputs(name, available, inputs_all)
            if alt is None:
                draft, _ = node_mod.process_round(st, [])
                return self._finalize_template(name, draft) if draft else None
            return self._assemble(name, alt)

        raise AssertionError(f"unhandled behavior {kind}")

    def _non_innovative_inputs(self, name, available, inputs_all):
        st = self.nodes[name].state
        q = st.params.q
        spans = []
        for c in self.topo.children(name):
            if c not in self.nodes:
                continue
            view = Span(q, self.m)
            for vec in self.nodes[c].received_vectors:
                view.add(vec.coding_vector)
            for other in self.topo.parents(c):
                if other == name or other not in self.nodes:
                    continue
                em = self.nodes[other].emission
                if em is not None:
                    view.add(em.E.coding_vector)
            if view.dim > 0:
                spans.append(view)
        received = {rp: st.buffers[rp].E for rp in available}
        alphas = _non_innovative_coeffs(received, spans, q, self.adversary_rng)
        if alphas is None:
            return None
        # The token states the coefficients actually used; they differ from
        # the prescribed pseudorandom ones, which is exactly what gets caught.
        return [
            ParentInput(rp, st.buffers[rp].sigma, st.buffers[rp].helper, a)
            for rp, a in zip(sorted(received), alphas)
        ]

    def _assemble(self, name: str, inputs: list[ParentInput]) -> Packet:
        st = self.nodes[name].state
        params = st.params
        E = gf.linear_combine(
            [st.buffers[i.parent_id].E for i in inputs], [i.coeff for i in inputs], params.q
        )
        sigma = validity.combine_validity(
            [i.sigma for i in inputs], [i.coeff for i in inputs], params
        )
        return self._assemble_raw(name, E, sigma, inputs)

    def _assemble_raw(
        self, name: str, E: CodedVector, sigma: int, token_inputs: list[ParentInput]
    ) -> Packet:
        st = self.nodes[name].state
        params = st.params
        if st.protocol is Protocol.LOGPIP:
            token, tree = pipcore.logpip_build(token_inputs, params, self.profile.h_bytes)
            st.current_tree = tree
        else:
            token = pipcore.pip_combine(token_inputs)
            st.current_tree = None
        return Packet(
            E=E, sigma=sigma, test_token=token, helper=b"",
            epoch_ref=node_mod.EpochRef(k=params.k, master_sig=params.master_sig),
            sender_id=st.node_id, attest=b"",
        )

    def _finalize_template(self, name: str, draft: node_mod.OutgoingDraft) -> Packet:
        st = self.nodes[name].state
        return Packet(
            E=draft.E, sigma=draft.sigma, test_token=draft.test_token, helper=b"",
            epoch_ref=draft.epoch_ref, sender_id=st.node_id, attest=b"",
        )

    def _finalize_for(self, name: str, template: Packet, child: str) -> Packet:
        st = self.nodes[name].state
        params = st.params
        helper = pipcore.make_helper_token(
            st.identity.sk, template.sigma, st.node_id, child.encode(), params
        )
        pkt = replace(template, helper=helper, attest=b"")
        signed = node_mod.packet_signed_bytes(pkt, params, self.profile.h_bytes)
        return replace(pkt, attest=sigcrypto.sign(st.identity.sk, signed))

    # -- main loop -----------------------------------------------------------

    def run(self) -> TransmissionReport:
        q = self.profile.q
        for epoch in range(1, self.epochs + 1):
            self.originals = gf.standard_basis_originals(
                [[self.rng.randrange(q) for _ in range(self.payload_chunks)]
                 for _ in range(self.m)],
                q,
            )
            params = validity.epoch_setup(
                self.master, self.originals, epoch, self.rng, self.profile
            )
            self.params = params
            self.flagged: dict[str, set[bytes]] = {n: set() for n in self.nodes}
            for sim_node in self.nodes.values():
                sim_node.state.enter_epoch(params)
                sim_node.emission = None
                sim_node.per_child = {}

            deliveries: dict[str, list[Packet]] = {n: [] for n in self.nodes}
            for child, pkt in self._source_packets(params).items():
                if child in self.nodes:
                    deliveries[child].append(pkt)

            for r in range(1, self.rounds + 1):
                self.round_now = r
                self._ingest_round(r, deliveries, epoch)
                deliveries = self._emit_round(r, epoch)

        ranks, decoded = {}, {}
        for s in self.topo.sinks:
            vectors = self.nodes[s].received_vectors
            ranks[s] = gf.rank(vectors, q)
            solved = gf.solve_originals(vectors, q)
            decoded[s] = solved is not None and solved == [
                o.payload for o in self.originals
            ]
        self.report.sink_ranks = ranks
        self.report.decoded = decoded
        self.report.rounds = self.rounds * self.epochs
        return self.report

    def _ingest_round(self, r: int, deliveries: dict[str, list[Packet]], epoch: int) -> None:
        for name in sorted(self.nodes):
            sim_node = self.nodes[name]
            st = sim_node.state
            for pkt in deliveries[name]:
                v = node_mod.verify_incoming(st, pkt)
                sender = pkt.sender_id.decode("utf-8", "replace")
                self.report.verdicts.append((r, name, sender, v))
                if v is not None:
                    self.report.detections.append(
                        DetectionEvent(round=r, verifier=name, culprit=sender, kind=v.kind)
                    )
                    if self.collect_proofs and pkt.sender_id in st.parents:
                        self.report.proofs.append(node_mod.build_misbehavior_proof(st, pkt))
                    self.flagged[name].add(pkt.sender_id)
                    continue
                self.flagged[name].discard(pkt.sender_id)
                st.buffers[pkt.sender_id] = pkt
                sim_node.received_vectors.append(pkt.E)
                if self.protocol is Protocol.LOGPIP:
                    self._challenge(r, name, pkt)

    def _challenge(self, r: int, name: str, pkt: Packet) -> None:
        sender_name = pkt.sender_id.decode()
        if sender_name == self.topo.source:
            return
        sender = self.nodes[sender_name]
        results = node_mod.challenge_parent(
            self.nodes[name].state, pkt,
            sender.state.current_tree, sender.state.identity.sk,
            self.challenges, self.challenge_rng,
        )
        for target, proof, v in results:
            if v is not None:
                self.report.detections.append(
                    DetectionEvent(round=r, verifier=name, culprit=sender_name, kind=v.kind)
                )
                if self.collect_proofs and proof is not None:
                    self.report.proofs.append(
                        node_mod.build_misbehavior_proof(
                            self.nodes[name].state, pkt, [(target, proof)]
                        )
                    )
                self.flagged[name].add(pkt.sender_id)

    def _emit_round(self, r: int, epoch: int) -> dict[str, list[Packet]]:
        nxt: dict[str, list[Packet]] = {n: [] for n in self.nodes}
        order = sorted(
            (n for n in self.nodes if self.topo.nodes[n].role is not Role.SINK),
            key=lambda n: (self.topo.nodes[n].behavior.kind is BehaviorKind.NON_INNOVATIVE, n),
        )
        for name in order:
            sim_node = self.nodes[name]
            template = self._behavior_emission(name, epoch)
            sim_node.emission = template
            if template is None:
                continue
            if (
                sim_node.spec.behavior.kind is BehaviorKind.REPLAY_OLD
                and epoch == 1
                and "template" not in sim_node.stored_old
            ):
                sim_node.stored_old["template"] = template
            for child in self.topo.children(name):
                if child not in self.nodes:
                    continue
                if sim_node.spec.behavior.kind is BehaviorKind.REPLAY_OLD and epoch > 1:
                    old = sim_node.stored_old.get(child)
                    if old is not None:
                        nxt[child].append(old)
                        continue
                pkt = self._finalize_for(name, template, child)
                if sim_node.spec.behavior.kind is BehaviorKind.REPLAY_OLD and epoch == 1:
                    sim_node.stored_old[child] = pkt
                nxt[child].append(pkt)
        return nxt


def run_simulation(
    topo: Topology,
    protocol: Protocol,
    m: int,
    rounds: int | None = None,
    rng_seed: int = 0,
    profile: Profile = SIM,
    payload_chunks: int = 2,
    epochs: int = 1,
    challenges: int = 1,
) -> TransmissionReport:
    """Run one deterministic transmission and measure ranks/detections.

    protocol NONE uses a crypto-free engine (vectors only), which is
    what the throughput mode sweeps run; PIP/LOGPIP run the full packet
    pipeline including verification verdicts and challenge rounds.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if protocol is Protocol.NONE:
        r = rounds if rounds is not None else default_rounds(topo, m)
        return _run_lite(topo, m, r, rng_seed, payload_chunks, profile)
    sim = Simulation(
        topo, protocol, m, rounds=rounds, rng_seed=rng_seed, profile=profile,
        payload_chunks=payload_chunks, epochs=epochs, challenges=challenges,
    )
    return sim.run()


# ---------------------------------------------------------------------------
# Mode sweep


MODES = {
    "mode1": BehaviorKind.NON_INNOVATIVE,
    "mode2": BehaviorKind.FORWARD_ONLY,
    "mode3": BehaviorKind.HONEST,
}


@dataclass
class SweepConfig:
    node_count: int = 50
    edge_count: int = 1000
    m: int = 5
    min_cuts: tuple = tuple(range(1, 11))
    byzantine_count: int = 1
    seeds: tuple = tuple(range(20))
    payload_chunks: int = 2
    profile: Profile = SIM


@dataclass(frozen=True)
class SweepRow:
    seed: int
    min_cut: int
    mode: str
    sink_id: str
    rank: int
    detections: int


def mode_sweep(config: SweepConfig) -> tuple[list[SweepRow], list[tuple[int, str, float]]]:
    """Throughput of each Byzantine mode across min-cut values.

    Returns (per-run rows, summary rows of (min_cut, mode, mean rank)).
    Infeasible (cut, seed) pairs are skipped for all modes so the
    comparison stays paired.
    """
    rows: list[SweepRow] = []
    summary: list[tuple[int, str, float]] = []
    for cut in config.min_cuts:
        per_mode: dict[str, list[int]] = {mode: [] for mode in MODES}
        for seed in config.seeds:
            try:
                topo = random_topology(
                    config.node_count, config.edge_count, cut,
                    config.byzantine_count, rng_seed=seed * 1000 + cut,
                )
            except InfeasibleTopologyError:
                continue
            sink = topo.sinks[0]
            for mode, kind in MODES.items():
                t = topo
                for byz in topo.byzantine:
                    t = t.with_behavior(byz, Behavior(kind))
                report = run_simulation(
                    t, Protocol.NONE, config.m, rng_seed=seed,
                    payload_chunks=config.payload_chunks, profile=config.profile,
                )
                per_mode[mode].append(report.sink_ranks[sink])
                rows.append(SweepRow(
                    seed=seed, min_cut=cut, mode=mode, sink_id=sink,
                    rank=report.sink_ranks[sink], detections=len(report.detections),
                ))
        for mode, ranks in per_mode.items():
            if ranks:
                summary.append((cut, mode, sum(ranks) / len(ranks)))
    return rows, summary


# ---------------------------------------------------------------------------
# Topology file format


def format_topology(topo: Topology) -> str:
    """Text format: role lines then edge lines."""
    lines = []
    for name in sorted(topo.nodes):
        spec = topo.nodes[name]
        lines.append(f"node {name} {spec.role.value} {spec.behavior.kind.value}")
    for u, v in sorted(topo.edges):
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def parse_topology(text: str) -> Topology:
    nodes: dict[str, NodeSpec] = {}
    edges: list[tuple[str, str]] = []
    source = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "node":
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 'node <id> <role> <behavior>'")
            _, name, role_s, behavior_s = parts
            try:
                role = Role(role_s)
                behavior = Behavior(BehaviorKind(behavior_s))
            except ValueError as e:
                raise ValueError(f"line {lineno}: {e}") from None
            nodes[name] = NodeSpec(role=role, behavior=behavior)
            if role is Role.SOURCE:
                source = name
        elif len(parts) == 2:
            edges.append((parts[0], parts[1]))
        else:
            raise ValueError(f"line {lineno}: cannot parse {line!r}")
    if source is None:
        raise ValueError("no source node declared")
    topo = Topology(nodes=nodes, edges=edges, source=source,
                    byzantine=[n for n, s in nodes.items()
                               if s.behavior.kind is not BehaviorKind.HONEST])
    topo.validate()
    return topo
