import random
from dataclasses import replace

import pytest

from rlncheck import gf, node as node_mod, pipcore, sigcrypto, validity
from rlncheck.node import EpochRef, Packet
from rlncheck.profiles import TEST


@pytest.fixture
def rng():
    return random.Random(0xC0DE)


@pytest.fixture
def tiny_epoch(rng):
    """p=23/q=11 epoch over two 2-chunk originals, plus its master identity."""
    master = sigcrypto.keygen(rng, b"src")
    originals = gf.standard_basis_originals([[3, 7], [5, 2]], TEST.q)
    params = validity.epoch_setup(master, originals, 1, rng, TEST)
    return master, originals, params


def finish_packet(sender, E, sigma, token, params, receiver_id, h_bytes=20):
    """Attach the per-receiver helper token and the attest signature."""
    helper = pipcore.make_helper_token(sender.sk, sigma, sender.node_id, receiver_id, params)
    pkt = Packet(
        E=E, sigma=sigma, test_token=token, helper=helper,
        epoch_ref=EpochRef(k=params.k, master_sig=params.master_sig),
        sender_id=sender.node_id, attest=b"",
    )
    signed = node_mod.packet_signed_bytes(pkt, params, h_bytes)
    return replace(pkt, attest=sigcrypto.sign(sender.sk, signed))


def source_packet(master, originals, params, receiver_id, combo, h_bytes=20):
    """A source emission: fresh combination, empty test token."""
    E = gf.linear_combine(originals, combo, params.q)
    sigma = validity.sign_validity(params, E)
    return finish_packet(
        master, E, sigma, pipcore.PipTestToken(entries=()), params, receiver_id, h_bytes
    )
