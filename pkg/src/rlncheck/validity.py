"""Homomorphic validity signatures with per-transmission source parameters.

The scheme is a discrete-log homomorphic hash: an epoch publishes fresh
generators g_1..g_{n+m} of a prime-order-q subgroup mod p, and the
validity signature of a packet vector E is sigma(E) = prod g_i^{e_i}.
Authenticity comes from the source master key signing the epoch
parameters (which include the sigmas of the m original packets), so any
node can both check that a received sigma matches the packet contents
and that the packet is the linear combination of originals its coding
vector claims:

    sigma == prod g_i^{e_i}  and  sigma == prod h_j^{c_j}

Signatures combine homomorphically, sigma(aE1 + bE2) =
sigma(E1)^a * sigma(E2)^b, which is what the token verification in
``pipcore`` relies on.  Rotating the generators every epoch makes
replayed packets from earlier transmissions fail verification.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import reduce

from . import sigcrypto
from .gf import CodedVector
from .profiles import Profile


@dataclass(frozen=True)
class SourceEpochParams:
    """Master-signed public parameters for one transmission epoch."""

    k: int
    p: int
    q: int
    generators: tuple[int, ...]  # one per packet chunk (n+m)
    original_hashes: tuple[int, ...]  # sigma of each original packet (m)
    master_sig: bytes

    @property
    def m(self) -> int:
        return len(self.original_hashes)

    @property
    def n(self) -> int:
        return len(self.generators) - self.m

    @property
    def p_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def q_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def epoch_pk_bytes(self) -> bytes:
        """Canonical byte encoding: k || p || q || generators || hashes."""
        pw, qw = self.p_bytes, self.q_bytes
        parts = [self.k.to_bytes(8, "big"), self.p.to_bytes(pw, "big"), self.q.to_bytes(qw, "big")]
        parts += [g.to_bytes(pw, "big") for g in self.generators]
        parts += [h.to_bytes(pw, "big") for h in self.original_hashes]
        return b"".join(parts)

    def sigma_to_bytes(self, sigma: int) -> bytes:
        return sigma.to_bytes(self.p_bytes, "big")


def epoch_setup(
    master: sigcrypto.NodeIdentity,
    original_packets: list[CodedVector],
    k: int,
    rng: random.Random,
    profile: Profile,
) -> SourceEpochParams:
    """Draw fresh per-epoch generators and sign them with the master key.

    The original packets must carry standard-basis coding vectors
    (packet j has c_j = 1 and all other coding chunks 0); their sigmas
    become the published original hashes h_j.
    """
    if not original_packets:
        raise ValueError("epoch_setup requires at least one original packet")
    if master.sk is None:
        raise ValueError("epoch_setup needs the master signing key")
    m = len(original_packets)
    n = original_packets[0].n
    for j, pkt in enumerate(original_packets):
        expected = tuple(1 if i == j else 0 for i in range(m))
        if pkt.coding_vector != expected or pkt.n != n:
            raise ValueError(f"original packet {j} lacks a standard-basis coding vector")

    p, q, g = profile.p, profile.q, profile.g
    if n + m > q - 1:
        raise ValueError(f"field of order {q} cannot host {n + m} distinct generators")
    exponents: list[int] = []
    seen: set[int] = set()
    while len(exponents) < n + m:
        r = rng.randrange(1, q)
        if r not in seen:
            seen.add(r)
            exponents.append(r)
    generators = tuple(pow(g, r, p) for r in exponents)

    partial = SourceEpochParams(
        k=k, p=p, q=q, generators=generators,
        original_hashes=tuple(_raw_sigma(generators, pkt.chunks, p, q) for pkt in original_packets),
        master_sig=b"",
    )
    sig = sigcrypto.sign(master.sk, partial.epoch_pk_bytes())
    return SourceEpochParams(
        k=k, p=p, q=q, generators=generators,
        original_hashes=partial.original_hashes, master_sig=sig,
    )


def verify_epoch(params: SourceEpochParams, master_pk: bytes) -> bool:
    return sigcrypto.verify(master_pk, params.epoch_pk_bytes(), params.master_sig)


def _raw_sigma(generators: tuple[int, ...], chunks: tuple[int, ...], p: int, q: int) -> int:
    out = 1
    for g, e in zip(generators, chunks):
        out = (out * pow(g, e % q, p)) % p
    return out


def sign_validity(params: SourceEpochParams, E: CodedVector) -> int:
    """sigma(E) = prod g_i^{e_i} mod p over all n+m chunks."""
    if E.n != params.n or E.m != params.m:
        raise ValueError(f"packet dims ({E.n},{E.m}) do not match epoch ({params.n},{params.m})")
    return _raw_sigma(params.generators, E.chunks, params.p, params.q)


def verify_validity(params: SourceEpochParams, E: CodedVector, sigma: int) -> bool:
    """True iff sigma matches the packet AND the packet matches its claim.

    Two-sided check: sigma must equal prod g_i^{e_i} (content binding)
    and prod h_j^{c_j} (the combination of originals the coding vector
    claims).  Never raises on adversarial input; any inconsistency is
    simply False.
    """
    if E.n != params.n or E.m != params.m:
        return False
    if not isinstance(sigma, int) or not 0 < sigma < params.p:
        return False
    if sigma != _raw_sigma(params.generators, E.chunks, params.p, params.q):
        return False
    claimed = 1
    for h, c in zip(params.original_hashes, E.coding_vector):
        claimed = (claimed * pow(h, c % params.q, params.p)) % params.p
    return sigma == claimed


def combine_validity(sigmas: list[int], coeffs: list[int], params: SourceEpochParams) -> int:
    """Homomorphic combination: prod sigma_i^{a_i} mod p."""
    if not sigmas or not coeffs:
        raise ValueError("combine_validity requires non-empty inputs")
    if len(sigmas) != len(coeffs):
        raise ValueError(f"{len(sigmas)} sigmas but {len(coeffs)} coefficients")
    return reduce(
        lambda acc, sa: (acc * pow(sa[0], sa[1] % params.q, params.p)) % params.p,
        zip(sigmas, coeffs),
        1,
    )
