"""Deterministic discrete-event simulation of Secure Zones and mobile firearms.

Radio is a disc: a node hears a transmitter iff its distance to the
transmitter is at most the radius.  Time runs in integer milliseconds from
``start_time`` (seconds on the shared clock).  Beacons carry whole-second
timestamps, and a node's clock reads ``start_time + t // 1000 + clock_offset``.

Scenario files are YAML; see FORMATS.md for the schema.
"""

from __future__ import annotations

import heapq
import io
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Union

import yaml

from . import pki
from .beacon import BeaconPayload, VerdictKind, build_beacon, encode_beacon, verify_beacon_bytes
from .errors import InvalidAttackWindow, ScenarioValidationError, SecureZoneError
from .pki import CentralAuthority, OperationMode, SzaState, TpdKeystore
from .policy import parse_policy, satisfies
from .token import TokenParams

SCENARIO_VERSION = 1
DEFAULT_KEY_LIFETIME = 10 * 365 * 86400

# event kinds in tiebreak order
EVENT_KINDS = (
    "BeaconSent",
    "AttackInjected",
    "BeaconReceived",
    "Verdict",
    "FeedbackHaptic",
    "FeedbackVisual",
    "LockEngaged",
    "LockReleased",
)
_KIND_RANK = {k: i for i, k in enumerate(EVENT_KINDS)}


@dataclass(frozen=True)
class ZoneSite:
    zone_id: int
    center: tuple[float, float]
    radius: float
    beacon_interval_ms: int
    sza: SzaState
    payload: BeaconPayload


@dataclass(frozen=True)
class FirearmNode:
    node_id: str
    keystore: TpdKeystore
    path: tuple[tuple[int, float, float], ...]
    clock_offset: int = 0

    @property
    def mode(self) -> OperationMode:
        return self.keystore.mode

    def position(self, t_ms: int) -> tuple[float, float]:
        path = self.path
        if t_ms <= path[0][0]:
            return path[0][1], path[0][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(path, path[1:]):
            if t_ms <= t1:
                f = (t_ms - t0) / (t1 - t0)
                return x0 + f * (x1 - x0), y0 + f * (y1 - y0)
        return path[-1][1], path[-1][2]


@dataclass(frozen=True)
class Replay:
    """Record a zone's broadcast at ``capture_ms`` and re-send the same bytes at ``replay_ms``."""
    zone_id: int
    capture_ms: int
    replay_ms: int
    position: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class RogueSza:
    """A transmitter holding the system key and token seed but no CA-issued certificate."""
    site: ZoneSite
    start_ms: int = 0
    end_ms: int | None = None


AttackScript = Union[Replay, RogueSza]


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_ms: int
    zones: tuple[ZoneSite, ...]
    nodes: tuple[FirearmNode, ...]
    attacks: tuple[AttackScript, ...] = ()
    rng_seed: int = 0
    start_time: int = 0
    ca: CentralAuthority | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SimEvent:
    t_ms: int
    node_id: str
    zone_id: int | None
    kind: str
    verdict: str | None = None
    detail: str = ""

    def sort_key(self) -> tuple:
        return (self.t_ms, -1 if self.zone_id is None else self.zone_id, self.node_id,
                _KIND_RANK[self.kind])

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"t_ms": self.t_ms, "kind": self.kind, "zone": self.zone_id,
                               "node": self.node_id or None}
        if self.verdict is not None:
            rec["verdict"] = self.verdict
        if self.detail:
            rec["detail"] = self.detail
        return rec


@dataclass
class SimReport:
    scenario: str
    events: list[SimEvent]

    @property
    def verdict_counts(self) -> Counter:
        return Counter(e.verdict for e in self.events if e.kind == "Verdict")

    @property
    def event_counts(self) -> Counter:
        return Counter(e.kind for e in self.events)

    def verdicts(self, node_id: str | None = None, zone_id: int | None = None) -> list[SimEvent]:
        return [e for e in self.events if e.kind == "Verdict"
                and (node_id is None or e.node_id == node_id)
                and (zone_id is None or e.zone_id == zone_id)]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_record(), sort_keys=True, separators=(",", ":")) + "\n"
                       for e in self.events)

    def summary_table(self) -> str:
        out = io.StringIO()
        out.write(f"scenario: {self.scenario}\n")
        out.write(f"{'event':<24}{'count':>8}\n")
        for kind in EVENT_KINDS:
            out.write(f"{kind:<24}{self.event_counts.get(kind, 0):>8}\n")
        out.write(f"{'verdict':<24}{'count':>8}\n")
        for kind in VerdictKind:
            out.write(f"{kind.value:<24}{self.verdict_counts.get(kind.value, 0):>8}\n")
        return out.getvalue()


# -- validation ------------------------------------------------------------

def _validate(sc: Scenario) -> None:
    if sc.duration_ms <= 0:
        raise ScenarioValidationError("duration must be positive")
    zone_ids = [z.zone_id for z in sc.zones]
    for attack in sc.attacks:
        if isinstance(attack, RogueSza):
            zone_ids.append(attack.site.zone_id)
    dup = [z for z, n in Counter(zone_ids).items() if n > 1]
    if dup:
        raise ScenarioValidationError(f"duplicate zone id {dup[0]}")
    node_ids = [n.node_id for n in sc.nodes]
    dup = [z for z, n in Counter(node_ids).items() if n > 1]
    if dup:
        raise ScenarioValidationError(f"duplicate node id {dup[0]!r}")
    for z in sc.zones:
        _validate_site(z)
    for n in sc.nodes:
        if not n.path:
            raise ScenarioValidationError(f"node {n.node_id!r} has no waypoints")
        times = [p[0] for p in n.path]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioValidationError(f"node {n.node_id!r}: waypoint times must strictly increase")
    for attack in sc.attacks:
        _validate_attack(sc, attack)


def _validate_site(z: ZoneSite) -> None:
    if not z.radius > 0:
        raise ScenarioValidationError(f"zone {z.zone_id}: radius must be positive")
    if z.beacon_interval_ms <= 0:
        raise ScenarioValidationError(f"zone {z.zone_id}: beacon interval must be positive")
    if z.sza.zone_id != z.zone_id:
        raise ScenarioValidationError(f"zone {z.zone_id}: SZA state is for zone {z.sza.zone_id}")


def _validate_attack(sc: Scenario, attack: AttackScript) -> None:
    if isinstance(attack, Replay):
        if attack.zone_id not in {z.zone_id for z in sc.zones}:
            raise ScenarioValidationError(f"replay attack references unknown zone id {attack.zone_id}")
        if not 0 <= attack.capture_ms < sc.duration_ms:
            raise InvalidAttackWindow(f"capture time {attack.capture_ms} ms outside the run")
        if not attack.capture_ms <= attack.replay_ms < sc.duration_ms:
            raise InvalidAttackWindow(
                f"replay time {attack.replay_ms} ms must lie in [capture time, duration)")
        if not attack.radius > 0:
            raise ScenarioValidationError("replay radius must be positive")
    elif isinstance(attack, RogueSza):
        _validate_site(attack.site)
        end = sc.duration_ms if attack.end_ms is None else attack.end_ms
        if not 0 <= attack.start_ms < end <= sc.duration_ms:
            raise InvalidAttackWindow("rogue SZA window must satisfy 0 <= start < end <= duration")
    else:
        raise ScenarioValidationError(f"unknown attack type {type(attack).__name__}")


def inject_attack(scenario: Scenario, attack: AttackScript) -> Scenario:
    _validate_attack(scenario, attack)
    new = replace(scenario, attacks=scenario.attacks + (attack,))
    _validate(new)
    return new


def make_rogue_site(ca: CentralAuthority, zone_id: int, policy: str, center, radius: float,
                    interval_ms: int, rng, payload: BeaconPayload | None = None) -> ZoneSite:
    """Rogue SZA: real system key and token seed, self-signed certificate."""
    sza = pki.sza_init(zone_id, rng)
    cert = pki.self_signed_certificate(zone_id, sza.signing_seed)
    sza = replace(sza, certificate=cert, system_pk=ca.system_pk, token_seed=ca.token_seed,
                  token_params=ca.token_params, policy=parse_policy(policy))
    return ZoneSite(zone_id, tuple(center), radius, interval_ms, sza,
                    payload or BeaconPayload(f"zone {zone_id}"))


# -- event loop ------------------------------------------------------------

def _in_range(pos, center, radius) -> bool:
    return math.hypot(pos[0] - center[0], pos[1] - center[1]) <= radius


def run_scenario(scenario: Scenario) -> SimReport:
    _validate(scenario)
    rng = random.Random(f"securezone-sim/{scenario.rng_seed}/beacons")
    events: list[SimEvent] = []
    locked: dict[str, bool] = {n.node_id: False for n in scenario.nodes}
    nodes = sorted(scenario.nodes, key=lambda n: n.node_id)
    captured: dict[int, list[tuple[int, bytes]]] = {z.zone_id: [] for z in scenario.zones}

    # (time, phase, zone_id, seq, action); phase 0 honest broadcast, 1 attack
    queue: list[tuple] = []
    seq = 0

    def push(t, phase, zone_id, action):
        nonlocal seq
        heapq.heappush(queue, (t, phase, zone_id, seq, action))
        seq += 1

    for z in scenario.zones:
        push(0, 0, z.zone_id, ("emit", z))
    for a in scenario.attacks:
        if isinstance(a, Replay):
            push(a.replay_ms, 1, a.zone_id, ("replay", a))
        else:
            push(a.start_ms, 1, a.site.zone_id, ("rogue", a))

    def deliver(t, zone_id, data, center, radius):
        for node in nodes:
            if not _in_range(node.position(t), center, radius):
                continue
            events.append(SimEvent(t, node.node_id, zone_id, "BeaconReceived"))
            if node.mode is OperationMode.OFF:
                continue
            now = scenario.start_time + t // 1000 + node.clock_offset
            v = verify_beacon_bytes(node.keystore, data, max(now, 0))
            events.append(SimEvent(t, node.node_id, zone_id, "Verdict", v.kind.value, v.detail))
            if not v.is_safe:
                events.append(SimEvent(t, node.node_id, zone_id, "FeedbackHaptic"))
                events.append(SimEvent(t, node.node_id, zone_id, "FeedbackVisual"))
                if node.mode is OperationMode.FULL_LOCK and not locked[node.node_id]:
                    locked[node.node_id] = True
                    events.append(SimEvent(t, node.node_id, zone_id, "LockEngaged"))
            elif node.mode is OperationMode.FULL_LOCK and locked[node.node_id]:
                locked[node.node_id] = False
                events.append(SimEvent(t, node.node_id, zone_id, "LockReleased"))

    while queue:
        t, _, zone_id, _, (what, obj) = heapq.heappop(queue)
        now = scenario.start_time + t // 1000
        if what == "emit":
            data = encode_beacon(build_beacon(obj.sza, obj.payload, now, rng))
            captured[zone_id].append((t, data))
            events.append(SimEvent(t, "", zone_id, "BeaconSent"))
            deliver(t, zone_id, data, obj.center, obj.radius)
            if t + obj.beacon_interval_ms < scenario.duration_ms:
                push(t + obj.beacon_interval_ms, 0, zone_id, ("emit", obj))
        elif what == "replay":
            history = [d for ct, d in captured[zone_id] if ct <= obj.capture_ms]
            data = history[-1]
            events.append(SimEvent(t, "", zone_id, "AttackInjected",
                                   detail=f"replay of capture at {obj.capture_ms} ms"))
            deliver(t, zone_id, data, obj.position, obj.radius)
        else:
            site = obj.site
            data = encode_beacon(build_beacon(site.sza, site.payload, now, rng))
            events.append(SimEvent(t, "", zone_id, "AttackInjected", detail="rogue SZA broadcast"))
            deliver(t, zone_id, data, site.center, site.radius)
            end = scenario.duration_ms if obj.end_ms is None else obj.end_ms
            if t + site.beacon_interval_ms < end:
                push(t + site.beacon_interval_ms, 1, zone_id, ("rogue", obj))

    events.sort(key=SimEvent.sort_key)
    return SimReport(scenario.name, events)


# -- persona matrix --------------------------------------------------------

PERSONAS = {
    "hunter": ("OPEN_HUNTING_AREA", "SHOOTING_RANGE"),
    "guard": ("COURT_JUSTICE", "SHOOTING_RANGE"),
    "civilian": ("SHOOTING_RANGE",),
    "law_enforcement": ("LAW_ENFORCEMENT",),
}

ZONE_POLICIES = {
    "hunting_area": "OPEN_HUNTING_AREA OR LAW_ENFORCEMENT",
    "courthouse": "COURT_JUSTICE OR LAW_ENFORCEMENT",
    "shooting_range": "SHOOTING_RANGE OR LAW_ENFORCEMENT",
    "police_facility": "LAW_ENFORCEMENT",
}


def verdict_matrix(personas: dict[str, Iterable[str]] = PERSONAS,
                   zone_policies: dict[str, str] = ZONE_POLICIES,
                   seed: int = 0, now: int = 1_000_000) -> dict[str, dict[str, VerdictKind]]:
    """Issue each persona a key, build one honest beacon per zone, verify every pair.

    A persona with no attributes cannot hold a key at all and is reported
    as policy-unsatisfied everywhere.
    """
    rng = random.Random(f"securezone-matrix/{seed}")
    ca = pki.ca_init(rng=rng)
    for attrs in personas.values():
        pki.define_attribute(ca, *attrs)
    for policy in zone_policies.values():
        pki.define_attribute(ca, *parse_policy(policy).attributes())
    beacons = {}
    for zone_id, (zname, policy) in enumerate(zone_policies.items(), start=1):
        sza = pki.sza_init(zone_id, rng)
        _, bundle = pki.register_sza(ca, zone_id, sza.public_key, policy)
        sza = pki.provision(sza, bundle)
        beacons[zname] = encode_beacon(build_beacon(sza, BeaconPayload(zname), now, rng))
    matrix: dict[str, dict[str, VerdictKind]] = {}
    for fid, (pname, attrs) in enumerate(personas.items(), start=1):
        attrs = tuple(attrs)
        if not attrs:
            matrix[pname] = {z: VerdictKind.ALERT_POLICY_UNSATISFIED for z in beacons}
            continue
        ks = pki.register_firearm(ca, fid, fid, attrs, now + DEFAULT_KEY_LIFETIME, rng, now=now)
        matrix[pname] = {z: verify_beacon_bytes(ks, data, now).kind for z, data in beacons.items()}
    return matrix


def satisfaction_matrix(personas: dict[str, Iterable[str]] = PERSONAS,
                        zone_policies: dict[str, str] = ZONE_POLICIES) -> dict[str, dict[str, bool]]:
    return {p: {z: satisfies(parse_policy(pol), attrs) for z, pol in zone_policies.items()}
            for p, attrs in personas.items()}


# -- scenario files --------------------------------------------------------

def _ms(seconds) -> int:
    return int(round(float(seconds) * 1000))


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioValidationError(f"{where}: missing field {key!r}")
    return d[key]


def _point(v, where: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ScenarioValidationError(f"{where}: expected [x, y]")
    return float(v[0]), float(v[1])


def load_scenario(source: Union[str, Path, dict]) -> Scenario:
    """Build a runnable scenario (CA, zones, keystores) from YAML text, a path, or a dict."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and source.endswith((".yaml", ".yml"))):
        source = Path(source).read_text(encoding="utf-8")
    doc = yaml.safe_load(source) if isinstance(source, str) else source
    if not isinstance(doc, dict):
        raise ScenarioValidationError("scenario must be a mapping")
    if doc.get("version") != SCENARIO_VERSION:
        raise ScenarioValidationError(f"unsupported scenario version {doc.get('version')!r}")
    try:
        return _build(doc)
    except ScenarioValidationError:
        raise
    except SecureZoneError as exc:
        raise ScenarioValidationError(str(exc)) from exc
    except (TypeError, ValueError, KeyError) as exc:
        raise ScenarioValidationError(f"malformed scenario: {exc}") from exc


def _build(doc: dict) -> Scenario:
    seed = int(doc.get("seed", 0))
    start = int(doc.get("start_time", 0))
    duration_ms = _ms(_require(doc, "duration", "scenario"))
    rng = random.Random(f"securezone-sim/{seed}/setup")
    tok = doc.get("token", {}) or {}
    params = TokenParams(period_seconds=int(tok.get("period", 30)), epoch_t0=int(tok.get("epoch", 0)))
    ca = pki.ca_init(rng=rng, token_params=params)
    pki.define_attribute(ca, *doc.get("attributes", []))

    zones = []
    for i, zd in enumerate(doc.get("zones", [])):
        where = f"zones[{i}]"
        zid = int(_require(zd, "id", where))
        policy = str(_require(zd, "policy", where))
        sza = pki.sza_init(zid, rng)
        try:
            _, bundle = pki.register_sza(ca, zid, sza.public_key, policy)
        except SecureZoneError as exc:
            raise ScenarioValidationError(f"{where} (zone {zid}): {exc}") from exc
        zones.append(ZoneSite(
            zid, _point(_require(zd, "center", where), where), float(_require(zd, "radius", where)),
            _ms(zd.get("interval", 10)), pki.provision(sza, bundle),
            BeaconPayload(str(zd.get("name", f"zone {zid}")), str(zd.get("advisory", "")))))

    nodes = []
    for i, nd in enumerate(doc.get("nodes", [])):
        where = f"nodes[{i}]"
        nid = str(_require(nd, "id", where))
        attrs = nd.get("attributes", [])
        et = int(nd.get("expires", start + DEFAULT_KEY_LIFETIME))
        mode = OperationMode.parse(str(nd.get("mode", "advisory")))
        try:
            ks = pki.register_firearm(ca, int(nd.get("firearm_id", i + 1)), int(nd.get("user_id", i + 1)),
                                      attrs, et, rng, now=start, mode=mode)
        except SecureZoneError as exc:
            raise ScenarioValidationError(f"{where} ({nid}): {exc}") from exc
        path = nd.get("path")
        if path is None:
            x, y = _point(_require(nd, "position", where), where)
            path = [[0, x, y]]
        waypoints = tuple((_ms(p[0]), float(p[1]), float(p[2])) for p in path)
        nodes.append(FirearmNode(nid, ks, waypoints, int(nd.get("clock_offset", 0))))

    sc = Scenario(str(doc.get("name", "scenario")), duration_ms, tuple(zones), tuple(nodes),
                  (), seed, start, ca)
    _validate(sc)
    for i, ad in enumerate(doc.get("attacks", []) or []):
        sc = inject_attack(sc, _attack_from_dict(sc, ad, f"attacks[{i}]", rng))
    return sc


def _attack_from_dict(sc: Scenario, ad: dict, where: str, rng) -> AttackScript:
    kind = _require(ad, "type", where)
    if kind == "replay":
        zid = int(_require(ad, "zone", where))
        site = next((z for z in sc.zones if z.zone_id == zid), None)
        if site is None:
            raise ScenarioValidationError(f"{where}: replay references unknown zone id {zid}")
        return Replay(zid, _ms(_require(ad, "capture_time", where)), _ms(_require(ad, "replay_time", where)),
                      _point(ad.get("position", list(site.center)), where),
                      float(ad.get("radius", site.radius)))
    if kind == "rogue_sza":
        zid = int(_require(ad, "zone", where))
        site = make_rogue_site(sc.ca, zid, str(_require(ad, "policy", where)),
                               _point(_require(ad, "center", where), where),
                               float(_require(ad, "radius", where)), _ms(ad.get("interval", 10)), rng,
                               BeaconPayload(str(ad.get("name", f"rogue {zid}")), str(ad.get("advisory", ""))))
        end = ad.get("end")
        return RogueSza(site, _ms(ad.get("start", 0)), None if end is None else _ms(end))
    raise ScenarioValidationError(f"{where}: unknown attack type {kind!r}")


def bundled_scenario(name: str) -> Path:
    path = Path(__file__).parent / "scenarios" / f"{name}.yaml"
    if not path.exists():
        raise ScenarioValidationError(f"no bundled scenario named {name!r}")
    return path
