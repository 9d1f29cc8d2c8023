"""``securezone`` command line.

Files stand in for the radio link and the out-of-band provisioning channel.
Every command accepts ``--seed`` (deterministic randomness) and ``--at``
(fixed clock, Unix seconds); with both set an invocation reads no ambient
time or entropy.

Exit codes: 0 success / SafeToOperate, 1 golden mismatch, 2 validation or
decode error, 3 cryptographic error, 10-14 firearm alert verdicts.
"""

from __future__ import annotations

import functools
import json
import random
import sys
import time
from pathlib import Path

import click
import yaml
from filelock import FileLock

from . import pki, sim
from .beacon import BeaconPayload, build_beacon, decode_beacon, encode_beacon, verify_beacon
from .errors import CryptoError, SecureZoneError, ValidationError
from .pki import CentralAuthority, OperationMode, SzaState, TpdKeystore
from .policy import parse_policy, print_policy
from .token import TokenParams

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_VALIDATION = 2
EXIT_CRYPTO = 3


def emit(action: str, **fields) -> None:
    click.echo(json.dumps({"action": action, **fields}, sort_keys=True, separators=(",", ":")))


def _rng(seed: int | None) -> random.Random:
    return random.SystemRandom() if seed is None else random.Random(seed)


def _now(at: int | None) -> int:
    return int(time.time()) if at is None else at


def _parse_at(ctx, param, value):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise click.BadParameter("expected Unix seconds") from None


def reproducible(f):
    """Add ``--seed`` and ``--at`` and map library errors onto exit codes."""
    @click.option("--seed", type=int, envvar="SECUREZONE_SEED", default=None,
                  help="RNG seed for reproducible output.")
    @click.option("--at", "at", envvar="SECUREZONE_AT", default=None, callback=_parse_at,
                  help="Fixed clock in Unix seconds.")
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (CryptoError, SecureZoneError) as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_CRYPTO)
    return wrapper


def _load_ca(path: Path) -> CentralAuthority:
    return CentralAuthority.from_bytes(path.read_bytes())


def _write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _attrs(text: str) -> list[str]:
    return [a for a in text.replace(" ", ",").split(",") if a]


registry_opt = click.option("--registry", type=click.Path(path_type=Path), envvar="SECUREZONE_REGISTRY",
                            default="ca.szr", show_default=True, help="CA registry file.")


@click.group()
@click.version_option(package_name="securezone")
def main() -> None:
    """Secure Zone key infrastructure, beacons, and simulation."""


# -- ca --------------------------------------------------------------------

@main.group()
def ca() -> None:
    """Central Authority administration."""


@ca.command("init")
@registry_opt
@click.option("--backend", default="transparent", show_default=True)
@click.option("--bits", type=int, default=255, show_default=True)
@click.option("--period", type=int, default=30, show_default=True, help="Token period in seconds.")
@click.option("--force", is_flag=True, help="Overwrite an existing registry.")
@reproducible
def ca_init(registry: Path, backend: str, bits: int, period: int, force: bool, seed, at) -> None:
    """Create a CA: ABE system keys, signing key, token seed."""
    if registry.exists() and not force:
        raise ValidationError(f"{registry} exists; pass --force to overwrite")
    with FileLock(str(registry) + ".lock"):
        authority = pki.ca_init(backend, bits, _rng(seed), TokenParams(period_seconds=period))
        _write(registry, authority.to_bytes())
    emit("ca.init", registry=str(registry), backend=authority.system_pk.backend_id,
         ca_public_key=authority.public_key.hex())


@ca.command("define-attr")
@registry_opt
@click.argument("names", nargs=-1, required=True)
@reproducible
def ca_define_attr(registry: Path, names, seed, at) -> None:
    """Add attributes to the universe."""
    with FileLock(str(registry) + ".lock"):
        authority = _load_ca(registry)
        pki.define_attribute(authority, *names)
        _write(registry, authority.to_bytes())
    emit("ca.define-attr", added=sorted(names), universe=sorted(authority.universe))


@ca.command("register-sza")
@registry_opt
@click.option("--zone", "zone_id", type=int, default=None, help="Zone id (needed when the zone file is new).")
@click.option("--policy", required=True, help="Zone access policy.")
@click.option("--zone-file", type=click.Path(path_type=Path), default=None,
              help="SZA state file; created if missing.  Default zone-<id>.szz")
@click.option("--cert-out", type=click.Path(path_type=Path), default=None,
              help="Certificate output.  Default zone-<id>.szc")
@reproducible
def ca_register_sza(registry: Path, zone_id, policy: str, zone_file, cert_out, seed, at) -> None:
    """Certify an SZA and provision its zone file."""
    if zone_file is None and zone_id is not None:
        zone_file = Path(f"zone-{zone_id}.szz")
    if zone_file is not None and zone_file.exists():
        sza = SzaState.from_bytes(zone_file.read_bytes())
        if zone_id is not None and zone_id != sza.zone_id:
            raise ValidationError(f"--zone {zone_id} disagrees with zone file ({sza.zone_id})")
    else:
        if zone_id is None:
            raise ValidationError("--zone is required when no zone file exists")
        sza = pki.sza_init(zone_id, _rng(seed))
    zone_file = zone_file or Path(f"zone-{sza.zone_id}.szz")
    cert_out = cert_out or Path(f"zone-{sza.zone_id}.szc")
    with FileLock(str(registry) + ".lock"):
        authority = _load_ca(registry)
        cert, bundle = pki.register_sza(authority, sza.zone_id, sza.public_key, parse_policy(policy))
        _write(registry, authority.to_bytes())
    _write(zone_file, pki.provision(sza, bundle).to_bytes())
    _write(cert_out, cert.to_bytes())
    emit("ca.register-sza", zone=sza.zone_id, policy=print_policy(bundle.policy),
         zone_file=str(zone_file), certificate=str(cert_out),
         verifies=cert.verify(authority.public_key))


def _issue(renew: bool, registry, firearm, user, attrs, et, out, mode, seed, at):
    now = _now(at)
    with FileLock(str(registry) + ".lock"):
        authority = _load_ca(registry)
        fn = pki.renew_key if renew else pki.register_firearm
        ks = fn(authority, firearm, user, _attrs(attrs), et, _rng(seed), now=now,
                mode=OperationMode.parse(mode))
        _write(registry, authority.to_bytes())
    _write(out, ks.to_bytes())
    emit("ca.renew-key" if renew else "ca.issue-key", firearm=firearm, user=user,
         attributes=sorted(ks.usk.attributes), expires=et, keystore=str(out), mode=ks.mode.name)


def _key_options(f):
    for opt in reversed([
        registry_opt,
        click.option("--firearm", type=int, required=True),
        click.option("--user", type=int, required=True),
        click.option("--attrs", required=True, help="Comma-separated attributes."),
        click.option("--et", type=int, required=True, help="Expiration, Unix seconds."),
        click.option("--out", type=click.Path(path_type=Path), envvar="SECUREZONE_KEYSTORE",
                     default="firearm.sztpd", show_default=True),
        click.option("--mode", default="advisory", show_default=True,
                     type=click.Choice(["off", "advisory", "full_lock"], case_sensitive=False)),
    ]):
        f = opt(f)
    return f


@ca.command("issue-key")
@_key_options
@reproducible
def ca_issue_key(registry, firearm, user, attrs, et, out, mode, seed, at) -> None:
    """Register a firearm and write its TPD keystore."""
    _issue(False, registry, firearm, user, attrs, et, out, mode, seed, at)


@ca.command("renew-key")
@_key_options
@reproducible
def ca_renew_key(registry, firearm, user, attrs, et, out, mode, seed, at) -> None:
    """Re-issue a registered firearm's key (expiry renewal or new attributes)."""
    _issue(True, registry, firearm, user, attrs, et, out, mode, seed, at)


@ca.command("show")
@registry_opt
@reproducible
def ca_show(registry: Path, seed, at) -> None:
    """Summarize a registry."""
    authority = _load_ca(registry)
    emit("ca.show", backend=authority.system_pk.backend_id, ca_public_key=authority.public_key.hex(),
         universe=sorted(authority.universe),
         zones={str(z): print_policy(r.policy) for z, r in sorted(authority.zones.items())},
         firearms=[{"firearm": f.firearm_id, "user": f.user_id, "serial": f.serial,
                    "expires": f.expiration_et, "attributes": sorted(f.attributes),
                    "superseded": f.superseded} for f in authority.firearms])


# -- sza -------------------------------------------------------------------

@main.group()
def sza() -> None:
    """Secure Zone Authority operations."""


@sza.command("init")
@click.option("--zone", "zone_id", type=int, required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Default zone-<id>.szz")
@reproducible
def sza_init(zone_id: int, out, seed, at) -> None:
    """Generate an SZA signing key (unprovisioned zone file)."""
    state = pki.sza_init(zone_id, _rng(seed))
    out = out or Path(f"zone-{zone_id}.szz")
    _write(out, state.to_bytes())
    emit("sza.init", zone=zone_id, zone_file=str(out), sza_public_key=state.public_key.hex())


@sza.command("beacon")
@click.option("--zone-file", type=click.Path(path_type=Path), required=True)
@click.option("--payload", default="", help="Advisory text carried in the beacon.")
@click.option("--name", "zone_name", default=None, help="Zone name (default: 'zone <id>').")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Default zone-<id>.szb")
@reproducible
def sza_beacon(zone_file: Path, payload: str, zone_name, out, seed, at) -> None:
    """Build one beacon and write it as a .szb file."""
    state = SzaState.from_bytes(zone_file.read_bytes())
    state.require_provisioned()
    now = _now(at)
    msg = build_beacon(state, BeaconPayload(zone_name or f"zone {state.zone_id}", payload), now, _rng(seed))
    data = encode_beacon(msg)
    out = out or Path(f"zone-{state.zone_id}.szb")
    _write(out, data)
    emit("sza.beacon", zone=state.zone_id, at=now, bytes=len(data), beacon=str(out),
         policy=print_policy(msg.policy))


# -- firearm ---------------------------------------------------------------

@main.group()
def firearm() -> None:
    """Firearm keystore and beacon verification."""


@firearm.command("verify")
@click.option("--keystore", type=click.Path(path_type=Path), envvar="SECUREZONE_KEYSTORE", required=True)
@click.option("--beacon", "beacon_path", type=click.Path(path_type=Path), required=True)
@click.option("--skew", type=click.IntRange(0, 2), default=1, show_default=True)
@reproducible
def firearm_verify(keystore: Path, beacon_path: Path, skew: int, seed, at) -> None:
    """Verify a beacon; the exit code encodes the verdict (0 safe, 10-14 alerts)."""
    ks = TpdKeystore.from_bytes(keystore.read_bytes())
    msg = decode_beacon(beacon_path.read_bytes())
    now = _now(at)
    verdict = verify_beacon(ks, msg, now, skew)
    fields = {"verdict": verdict.kind.value, "zone": msg.zone_id, "at": now, "detail": verdict.detail}
    if verdict.payload is not None:
        fields.update(zone_name=verdict.payload.zone_name, advisory=verdict.payload.advisory_text)
    emit("firearm.verify", **fields)
    click.echo(verdict.kind.value)
    sys.exit(verdict.kind.exit_code)


@firearm.command("inspect")
@click.option("--keystore", type=click.Path(path_type=Path), envvar="SECUREZONE_KEYSTORE", required=True)
@reproducible
def firearm_inspect(keystore: Path, seed, at) -> None:
    """Print keystore metadata (never secret material)."""
    ks = TpdKeystore.from_bytes(keystore.read_bytes())
    emit("firearm.inspect", firearm=ks.usk.firearm_id, user=ks.usk.user_id,
         attributes=sorted(ks.usk.attributes), expires=ks.usk.expiration_et, mode=ks.mode.name,
         backend=ks.usk.backend_id, ca_public_key=ks.ca_public_key.hex(),
         token_period=ks.token_params.period_seconds)


@firearm.command("set-mode")
@click.option("--keystore", type=click.Path(path_type=Path), envvar="SECUREZONE_KEYSTORE", required=True)
@click.argument("mode", type=click.Choice(["off", "advisory", "full_lock"], case_sensitive=False))
@reproducible
def firearm_set_mode(keystore: Path, mode: str, seed, at) -> None:
    """Switch the operation mode recorded in a keystore."""
    ks = TpdKeystore.from_bytes(keystore.read_bytes()).with_mode(OperationMode.parse(mode))
    _write(keystore, ks.to_bytes())
    emit("firearm.set-mode", keystore=str(keystore), mode=ks.mode.name)


# -- sim -------------------------------------------------------------------

@main.group("sim")
def sim_group() -> None:
    """Zone simulation."""


@sim_group.command("run")
@click.option("--scenario", required=True,
              help="Scenario YAML path, or the name of a bundled scenario.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write the event log here.")
@click.option("--check", type=click.Path(path_type=Path), default=None,
              help="Compare the event log byte-for-byte with a golden file.")
@click.option("--summary/--no-summary", default=True)
@reproducible
def sim_run(scenario: str, out, check, summary: bool, seed, at) -> None:
    """Run a scenario and write its line-delimited event log."""
    path = Path(scenario)
    if not path.exists() and not scenario.endswith((".yaml", ".yml")):
        path = sim.bundled_scenario(scenario)
    doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    if seed is not None and isinstance(doc, dict):
        doc["seed"] = seed
    report = sim.run_scenario(sim.load_scenario(doc))
    log = report.to_jsonl().encode()
    if out is not None:
        _write(out, log)
    if summary:
        click.echo(report.summary_table(), nl=False)
    emit("sim.run", scenario=report.scenario, events=len(report.events),
         verdicts=dict(sorted(report.verdict_counts.items())), out=str(out) if out else None)
    if check is not None:
        if check.read_bytes() != log:
            click.echo(f"mismatch against {check}", err=True)
            sys.exit(EXIT_MISMATCH)
        emit("sim.check", golden=str(check), match=True)


@sim_group.command("matrix")
@reproducible
def sim_matrix(seed, at) -> None:
    """Persona x zone verdict matrix next to the policy satisfaction matrix."""
    now = 1_000_000 if at is None else at
    verdicts = sim.verdict_matrix(seed=seed or 0, now=now)
    sat = sim.satisfaction_matrix()
    zones = list(sim.ZONE_POLICIES)
    click.echo(f"{'persona':<18}" + "".join(f"{z:>18}" for z in zones))
    for persona, row in verdicts.items():
        click.echo(f"{persona:<18}" + "".join(f"{row[z].value[:16]:>18}" for z in zones))
    agree = all(row[z].is_safe == sat[p][z] for p, row in verdicts.items() for z in zones)
    emit("sim.matrix", agrees_with_policy=agree)
    sys.exit(EXIT_OK if agree else EXIT_MISMATCH)


if __name__ == "__main__":
    main()
