"""Acceptance criteria, one test each.  Run with ``-s`` to see the PASS/FAIL lines."""

import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from securezone import abe, sim
from securezone.beacon import (
    BeaconPayload,
    VerdictKind,
    abe_region,
    build_beacon,
    decode_beacon,
    encode_beacon,
    verify_beacon,
    verify_beacon_bytes,
)
from securezone.errors import PolicyNotSatisfied, IntegrityFailure
from securezone.policy import parse_policy
from securezone.token import TokenParams, token_at, step_at

from conftest import FAR, T0, make_world
from harness import FAULTS, RUNG_OF, collusion_trial, faulty_beacon
from oracles import RFC6238_SEEDS, RFC6238_TABLE, evaluate, random_formula, render, subsets

HERE = Path(__file__).parent
UNIVERSE5 = ("A", "B", "C", "D", "E")


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    return emit


def test_01_abe_correctness_sweep(report):
    start = time.perf_counter()
    rng = random.Random(101)
    pk, msk = abe.setup(rng=rng)
    keys = {s: abe.keygen(msk, pk, i, i, 2**40, s, rng)
            for i, s in enumerate(subsets(UNIVERSE5)) if s}
    cases = agree = 0
    for _ in range(50):
        f = random_formula(rng, list(UNIVERSE5), depth=3)
        ct = abe.encrypt(pk, parse_policy(render(f)), b"sweep", rng)
        for s in subsets(UNIVERSE5):
            ok = False
            if s:
                try:
                    ok = abe.decrypt(keys[s], ct) == b"sweep"
                except (PolicyNotSatisfied, IntegrityFailure):
                    ok = False
            cases += 1
            agree += ok == evaluate(f, s)
    elapsed = time.perf_counter() - start
    passed = cases == 1600 and agree == cases and elapsed < 30
    report(1, passed, f"{agree}/{cases} cases agree with truth table in {elapsed:.2f}s (< 30s)")
    assert passed


def test_02_collusion(report):
    rng = random.Random(202)
    pk, msk = abe.setup(rng=rng)
    successes = sum(collusion_trial(rng, pk, msk, UNIVERSE5) is None for _ in range(100))
    report(2, successes == 0, f"{successes} successes in 100 mixed-key attempts")
    assert successes == 0


def test_03_replay(report):
    world = make_world(303)
    rng = random.Random(303)
    sza = world.zone(1, "SHOOTING_RANGE")
    ks = world.keystore({"SHOOTING_RANGE"})
    period = sza.token_params.period_seconds
    late = {k: 0 for k in VerdictKind}
    same = 0
    for _ in range(500):
        capture = rng.randrange(T0, T0 + 10**6)
        delta = rng.randrange(2 * period, 20 * period)
        data = encode_beacon(build_beacon(sza, BeaconPayload("range"), capture, rng))
        late[verify_beacon_bytes(ks, data, capture + delta).kind] += 1
        same += verify_beacon_bytes(ks, data, capture).is_safe
    safe, mism = late[VerdictKind.SAFE_TO_OPERATE], late[VerdictKind.ALERT_TOKEN_MISMATCH]
    passed = safe == 0 and mism == 500 and same == 500
    report(3, passed, f"delta>=2 periods: {safe} Safe, {mism} TokenMismatch of 500; "
                      f"delta=0: {same}/500 Safe")
    assert passed


def test_04_ladder(report, payload):
    combos = [(f,) for f in FAULTS] + [(a, b) for i, a in enumerate(FAULTS) for b in FAULTS[i + 1:]]
    expected = {1: VerdictKind.ALERT_POLICY_UNSATISFIED, 2: VerdictKind.ALERT_TOKEN_MISMATCH,
                3: VerdictKind.ALERT_KEY_EXPIRED, 4: VerdictKind.ALERT_INVALID_AUTHORITY,
                5: VerdictKind.ALERT_INVALID_MESSAGE}
    world = make_world(404)
    exact = 0
    for faults in combos:
        ks, b, at = faulty_beacon(world, faults, T0, payload)
        exact += verify_beacon(ks, b, at).kind is expected[min(RUNG_OF[f] for f in faults)]
    passed = len(combos) == 15 and exact == 15
    report(4, passed, f"{exact}/{len(combos)} fault combinations give the earliest rung's verdict")
    assert passed


def test_05_persona_matrix(report):
    verdicts = sim.verdict_matrix(seed=5)
    sat = sim.satisfaction_matrix()
    cells = [(p, z) for p in sat for z in sat[p]]
    match = sum(verdicts[p][z].is_safe == sat[p][z] for p, z in cells)
    passed = len(cells) == 16 and match == 16
    report(5, passed, f"{match}/{len(cells)} persona x zone cells match the satisfaction matrix")
    assert passed


@pytest.mark.parametrize("alg", ["sha1", "sha256", "sha512"])
def test_06_rfc_token_vectors(report, alg):
    col = {"sha1": 1, "sha256": 2, "sha512": 3}[alg]
    params = TokenParams(period_seconds=30, mac_algorithm=alg, mode="rfc6238")
    rows = [token_at(RFC6238_SEEDS[alg], params, step_at(params, row[0])).decode() == row[col]
            for row in RFC6238_TABLE]
    report(6, all(rows), f"{sum(rows)}/{len(rows)} published vectors reproduced for {alg}")
    assert all(rows)


def _golden_digests() -> str:
    code = ("import hashlib, golden_builders as g;"
            "print(hashlib.sha256(g.ca_registry()).hexdigest(),"
            " hashlib.sha256(g.beacon()).hexdigest(),"
            " hashlib.sha256(g.sim_report('three_zones')).hexdigest())")
    return subprocess.run([sys.executable, "-c", code], cwd=HERE, check=True,
                          capture_output=True, text=True).stdout


def test_07_wire_and_goldens(report):
    world = make_world(707)
    rng = random.Random(707)
    zones = [world.zone(i, render(random_formula(rng, ["SHOOTING_RANGE", "LAW_ENFORCEMENT",
                                                       "COURT_JUSTICE", "OPEN_HUNTING_AREA"], 2)))
             for i in range(1, 21)]
    identical = 0
    for _ in range(1000):
        sza = rng.choice(zones)
        b = build_beacon(sza, BeaconPayload("z" * rng.randrange(1, 60), "a" * rng.randrange(80)),
                         rng.randrange(T0, T0 + 10**7), rng)
        data = encode_beacon(b)
        identical += decode_beacon(data) == b and encode_beacon(decode_beacon(data)) == data
    first, second = _golden_digests(), _golden_digests()
    import golden_builders as g
    on_disk = all((HERE / "golden" / n).read_bytes() == g.BUILDERS[n]()
                  for n in ("ca_registry.szr", "beacon.szb", "three_zones.jsonl"))
    passed = identical == 1000 and first == second and on_disk
    report(7, passed, f"{identical}/1000 roundtrips; goldens identical across runs: {first == second}; "
                      f"match committed files: {on_disk}")
    assert passed


def test_08_tamper(report):
    world = make_world(808)
    rng = random.Random(808)
    ks = world.keystore({"SHOOTING_RANGE", "COURT_JUSTICE", "LAW_ENFORCEMENT", "OPEN_HUNTING_AREA"})
    zones = [world.zone(i, render(random_formula(rng, ["SHOOTING_RANGE", "LAW_ENFORCEMENT",
                                                       "COURT_JUSTICE", "OPEN_HUNTING_AREA"], 1)))
             for i in range(1, 11)]
    flips = escapes = clean_safe = 0
    for _ in range(200):
        sza = rng.choice(zones)
        data = encode_beacon(build_beacon(sza, BeaconPayload("z"), T0, rng))
        clean_safe += verify_beacon_bytes(ks, data, T0).is_safe
        start, end = abe_region(data)
        buf = bytearray(data)
        for i in range(start, end):
            old = buf[i]
            buf[i] = old ^ rng.randrange(1, 256)
            flips += 1
            escapes += verify_beacon_bytes(ks, bytes(buf), T0).is_safe
            buf[i] = old
    passed = escapes == 0
    report(8, passed, f"{escapes} escapes over {flips} single-byte flips in 200 beacons "
                      f"({clean_safe}/200 untampered beacons Safe)")
    assert passed


def test_09_expiry(report, payload):
    world = make_world(909)
    rng = random.Random(909)
    sza = world.zone(1, "SHOOTING_RANGE")
    expired = boundary = 0
    for _ in range(100):
        ts = rng.randrange(T0, T0 + 10**6)
        b = build_beacon(sza, payload, ts, rng)
        old = world.keystore({"SHOOTING_RANGE"}, et=ts - rng.randrange(1, 900))
        edge = world.keystore({"SHOOTING_RANGE"}, et=ts)
        expired += verify_beacon(old, b, ts).kind is VerdictKind.ALERT_KEY_EXPIRED
        boundary += verify_beacon(edge, b, ts).is_safe
    passed = expired == 100 and boundary == 100
    report(9, passed, f"et < ts: {expired}/100 KeyExpired; et == ts: {boundary}/100 Safe")
    assert passed


def test_10_sim_determinism(report):
    path = sim.bundled_scenario("three_zones")
    logs, times = [], []
    for _ in range(5):
        start = time.perf_counter()
        logs.append(sim.run_scenario(sim.load_scenario(path)).to_jsonl())
        times.append(time.perf_counter() - start)
    sc = sim.load_scenario(path)
    shape = (len(sc.zones), len(sc.nodes), len(sc.attacks))
    passed = len(set(logs)) == 1 and max(times) < 5 and shape == (3, 5, 2)
    report(10, passed, f"{len(set(logs))} distinct logs over 5 runs of a {shape} scenario; "
                       f"slowest run {max(times):.2f}s (< 5s)")
    assert passed
