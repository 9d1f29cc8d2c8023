"""Deterministic producers for the files under tests/golden/.

Run ``python tests/golden_builders.py`` to regenerate after an intentional
format change.
"""

import random
import sys
from pathlib import Path

from securezone import abe, pki, sim
from securezone.beacon import BeaconPayload, build_beacon, encode_beacon
from securezone.policy import parse_policy

GOLDEN = Path(__file__).parent / "golden"
BEACON_TIME = 1_700_000_000
BEACON_POLICY = "SHOOTING_RANGE OR LAW_ENFORCEMENT"


def system_pk() -> bytes:
    pk, _ = abe.setup(rng=random.Random(7))
    return pk.to_bytes()


def abe_ciphertext() -> bytes:
    pk, _ = abe.setup(rng=random.Random(7))
    return abe.encrypt(pk, parse_policy("A AND (B OR C)"), b"golden payload", random.Random(8)).to_bytes()


def ca_registry() -> bytes:
    return pki.ca_init(rng=random.Random(42)).to_bytes()


def beacon_world():
    ca = pki.ca_init(rng=random.Random(42))
    pki.define_attribute(ca, "SHOOTING_RANGE", "LAW_ENFORCEMENT", "OPEN_HUNTING_AREA")
    sza = pki.sza_init(7, random.Random(43))
    _, bundle = pki.register_sza(ca, 7, sza.public_key, BEACON_POLICY)
    return ca, pki.provision(sza, bundle)


def beacon() -> bytes:
    _, sza = beacon_world()
    msg = build_beacon(sza, BeaconPayload("Shooting range", "open"), BEACON_TIME, random.Random(44))
    return encode_beacon(msg)


def sim_report(name: str) -> bytes:
    return sim.run_scenario(sim.load_scenario(sim.bundled_scenario(name))).to_jsonl().encode()


BUILDERS = {
    "system_pk.bin": system_pk,
    "abe_ct.bin": abe_ciphertext,
    "ca_registry.szr": ca_registry,
    "beacon.szb": beacon,
    "three_zones.jsonl": lambda: sim_report("three_zones"),
    "persona_matrix.jsonl": lambda: sim_report("persona_matrix"),
}


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for name, build in BUILDERS.items():
        (GOLDEN / name).write_bytes(build())
        print("wrote", name, file=sys.stderr)
