import random
from dataclasses import replace

import pytest

from securezone import abe
from securezone.backend import PRIMES, TransparentBackend, get_backend
from securezone.errors import (
    DecodeError,
    EmptyAttributeSet,
    ExpirationInPast,
    IntegrityFailure,
    PolicyNotSatisfied,
    UnsupportedBackend,
)
from securezone.policy import parse_policy, satisfies

import golden_builders
from conftest import GOLDEN
from harness import collusion_trial
from oracles import leaf_count, random_formula, render, subsets


@pytest.fixture(scope="module")
def keys():
    return abe.setup(rng=random.Random(11))


def test_setup_consistency(keys):
    pk, msk = keys
    be = pk.backend
    assert pk.egg_alpha == be.gt_exp(be.pair(pk.g, pk.g), msk.alpha)
    assert be.pair(pk.g, pk.h) == be.gt_exp(be.pair(pk.g, pk.g), msk.beta)
    assert msk.beta != 0


def test_setup_randomized():
    _, m1 = abe.setup(rng=random.Random(1))
    _, m2 = abe.setup(rng=random.Random(2))
    assert (m1.alpha, m1.beta) != (m2.alpha, m2.beta)


def test_setup_deterministic_golden():
    assert golden_builders.system_pk() == golden_builders.system_pk()
    assert golden_builders.system_pk() == (GOLDEN / "system_pk.bin").read_bytes()


def test_unsupported_backend():
    with pytest.raises(UnsupportedBackend):
        abe.setup("bls12-381", 381)
    with pytest.raises(UnsupportedBackend):
        abe.setup("transparent", 100)


@pytest.mark.parametrize("bits", sorted(PRIMES))
def test_bilinearity(bits):
    be = get_backend("transparent", bits)
    rng = random.Random(bits)
    g = be.generator()
    base = be.pair(g, g)
    for _ in range(100):
        a, b = be.random_scalar(rng), be.random_scalar(rng)
        assert be.pair(be.g_exp(g, a), be.g_exp(g, b)) == be.gt_exp(base, a * b % be.order)


def test_hash_to_group_deterministic():
    be = TransparentBackend()
    assert be.hash_to_g("SHOOTING_RANGE") == be.hash_to_g("SHOOTING_RANGE")
    assert be.hash_to_g("SHOOTING_RANGE") != be.hash_to_g("LAW_ENFORCEMENT")


def test_shamir_shares_interpolate():
    # two-level tree: root secret recovered from any threshold-sized subset
    p = PRIMES[127]
    policy = parse_policy("THRESHOLD(2; A, B, C)")
    shares = abe.share_secret(policy, 123456789, p, random.Random(5))
    for subset in ([1, 2], [1, 3], [2, 3]):
        acc = sum(shares[i - 1] * abe.lagrange_at_zero(i, subset, p) for i in subset) % p
        assert acc == 123456789


def test_civilian_key_decrypts_range_policy(keys):
    pk, msk = keys
    usk = abe.keygen(msk, pk, 1, 1, 2**40, {"SHOOTING_RANGE"}, random.Random(3))
    ct = abe.encrypt(pk, parse_policy("SHOOTING_RANGE"), b"range open", random.Random(4))
    assert abe.decrypt(usk, ct) == b"range open"


def test_civilian_key_rejected_by_law_enforcement_policy(keys):
    pk, msk = keys
    usk = abe.keygen(msk, pk, 1, 1, 2**40, {"SHOOTING_RANGE"}, random.Random(3))
    ct = abe.encrypt(pk, parse_policy("LAW_ENFORCEMENT"), b"x", random.Random(4))
    with pytest.raises(PolicyNotSatisfied):
        abe.decrypt(usk, ct)


def test_keygen_fresh_randomizer(keys):
    pk, msk = keys
    rng = random.Random(9)
    k1 = abe.keygen(msk, pk, 1, 1, 2**40, {"A"}, rng)
    k2 = abe.keygen(msk, pk, 1, 1, 2**40, {"A"}, rng)
    assert k1.randomizer_x != k2.randomizer_x


def test_keygen_errors(keys):
    pk, msk = keys
    with pytest.raises(EmptyAttributeSet):
        abe.keygen(msk, pk, 1, 1, 2**40, set())
    with pytest.raises(ExpirationInPast):
        abe.keygen(msk, pk, 1, 1, 100, {"A"}, issued_at=200)


def test_random_pairs_six_attributes(keys):
    pk, msk = keys
    rng = random.Random(21)
    universe = [f"ATTR{i}" for i in range(6)]
    for _ in range(100):
        f = random_formula(rng, universe)
        policy = parse_policy(render(f))
        attrs = {a for a in universe if rng.random() < 0.5} or {universe[0]}
        usk = abe.keygen(msk, pk, 1, 1, 2**40, attrs, rng)
        ct = abe.encrypt(pk, policy, b"m", rng)
        try:
            ok = abe.decrypt(usk, ct) == b"m"
        except PolicyNotSatisfied:
            ok = False
        assert ok == satisfies(policy, attrs)


def test_leaf_pair_count(keys):
    pk, _ = keys
    rng = random.Random(22)
    for _ in range(50):
        f = random_formula(rng, ["A", "B", "C", "D"])
        ct = abe.encrypt(pk, parse_policy(render(f)), b"", rng)
        assert len(ct.leaves) == leaf_count(f)


def test_encrypt_golden():
    assert golden_builders.abe_ciphertext() == (GOLDEN / "abe_ct.bin").read_bytes()


def test_serialization_roundtrip(keys):
    pk, msk = keys
    rng = random.Random(23)
    usk = abe.keygen(msk, pk, 2**63, 7, 2**40, {"A", "B"}, rng)
    ct = abe.encrypt(pk, parse_policy("A AND (B OR C)"), b"payload", rng)
    assert abe.SystemPublicKey.from_bytes(pk.to_bytes()) == pk
    assert abe.UserSecretKey.from_bytes(usk.to_bytes()) == usk
    assert abe.AbeCiphertext.from_bytes(ct.to_bytes()) == ct
    assert abe.decrypt(abe.UserSecretKey.from_bytes(usk.to_bytes()), abe.AbeCiphertext.from_bytes(ct.to_bytes())) == b"payload"


def test_decode_rejects_noncanonical_element(keys):
    pk, _ = keys
    data = bytearray(pk.to_bytes())
    # g lives after version(1) + id(2+15) + length(2)
    off = 1 + 2 + len(pk.backend_id) + 2
    data[off:off + 32] = b"\xff" * 32
    with pytest.raises(DecodeError):
        abe.SystemPublicKey.from_bytes(bytes(data))


def test_dem_byte_flip_is_integrity_failure(keys):
    pk, msk = keys
    rng = random.Random(24)
    usk = abe.keygen(msk, pk, 1, 1, 2**40, {"A"}, rng)
    ct = abe.encrypt(pk, parse_policy("A OR B"), b"some payload bytes", rng)
    for i in range(len(ct.dem_ct)):
        dem = bytearray(ct.dem_ct)
        dem[i] ^= 0x01
        with pytest.raises(IntegrityFailure):
            abe.decrypt(usk, replace(ct, dem_ct=bytes(dem)))


def test_unused_leaf_tamper_detected(keys):
    # with "A OR B" a holder of A never pairs against B's leaf; it is still authenticated
    pk, msk = keys
    rng = random.Random(25)
    usk = abe.keygen(msk, pk, 1, 1, 2**40, {"A"}, rng)
    ct = abe.encrypt(pk, parse_policy("A OR B"), b"x", rng)
    leaves = list(ct.leaves)
    leaves[1] = (leaves[1][0] ^ 1, leaves[1][1])
    with pytest.raises(IntegrityFailure):
        abe.decrypt(usk, replace(ct, leaves=tuple(leaves)))


def test_collusion_harness(keys):
    pk, msk = keys
    rng = random.Random(26)
    for _ in range(100):
        assert collusion_trial(rng, pk, msk) is not None


def test_correctness_small_exhaustive(keys):
    pk, msk = keys
    rng = random.Random(27)
    universe = ["A", "B", "C", "D"]
    for _ in range(10):
        f = random_formula(rng, universe)
        policy = parse_policy(render(f))
        ct = abe.encrypt(pk, policy, b"ok", rng)
        for s in subsets(universe):
            if not s:
                continue
            usk = abe.keygen(msk, pk, 1, 1, 2**40, s, rng)
            if satisfies(policy, s):
                assert abe.decrypt(usk, ct) == b"ok"
            else:
                with pytest.raises(PolicyNotSatisfied):
                    abe.decrypt(usk, ct)
