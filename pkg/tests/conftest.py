import random
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

from securezone import pki
from securezone.beacon import BeaconPayload

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN = Path(__file__).parent / "golden"
T0 = 1_700_000_000  # a period boundary for period 30
FAR = T0 + 10 * 365 * 86400
UNIVERSE = ("OPEN_HUNTING_AREA", "SHOOTING_RANGE", "COURT_JUSTICE", "LAW_ENFORCEMENT")


@dataclass
class World:
    ca: pki.CentralAuthority
    rng: random.Random

    def zone(self, zone_id: int, policy: str) -> pki.SzaState:
        sza = pki.sza_init(zone_id, self.rng)
        _, bundle = pki.register_sza(self.ca, zone_id, sza.public_key, policy)
        return pki.provision(sza, bundle)

    def keystore(self, attrs, et: int = FAR, firearm_id: int | None = None,
                 mode=pki.OperationMode.ADVISORY) -> pki.TpdKeystore:
        fid = firearm_id if firearm_id is not None else self.rng.randrange(1, 2**32)
        return pki.register_firearm(self.ca, fid, fid, attrs, et, self.rng, now=T0 - 1000, mode=mode)


def make_world(seed: int = 0, extra=()) -> World:
    rng = random.Random(seed)
    ca = pki.ca_init(rng=rng)
    pki.define_attribute(ca, *UNIVERSE, *extra)
    return World(ca, rng)


@pytest.fixture
def world() -> World:
    return make_world()


@pytest.fixture
def payload() -> BeaconPayload:
    return BeaconPayload("Shooting range", "open")
