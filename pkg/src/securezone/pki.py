"""Central Authority and Secure Zone Authority state, certificates, keystores.

Signatures are Ed25519 (deterministic, so CA and SZA state files and
certificates are reproducible under a fixed RNG seed).  The CA "encrypting
the SZA public key with its private key" is a signature over
``zone_id || sza_public_key``; firearms check it with the CA public key
stored in their keystore.
"""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass, field, replace
from typing import Iterable

from cryptography.exceptions import InvalidSignature as _CryptoInvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from . import abe
from .abe import MasterSecretKey, SystemPublicKey, UserSecretKey
from .errors import (
    DecodeError,
    DuplicateZoneId,
    NotProvisioned,
    UnknownAttribute,
    UnknownAttributeInPolicy,
    UnknownFirearm,
    ValidationError,
)
from .policy import AccessPolicy, Attribute, parse_policy, print_policy
from .token import TokenParams, check_seed
from .wire import Reader, Writer

KEYSTORE_MAGIC = b"SZTPD1"
REGISTRY_MAGIC = b"SZCA1"
ZONE_MAGIC = b"SZSZA1"
CERT_MAGIC = b"SZCRT1"
BUNDLE_MAGIC = b"SZPRV1"

SIGNING_SEED_BYTES = 32
TOKEN_SEED_BYTES = 32


# -- signatures ------------------------------------------------------------

def public_key_bytes(signing_seed: bytes) -> bytes:
    return (Ed25519PrivateKey.from_private_bytes(signing_seed).public_key()
            .public_bytes(Encoding.Raw, PublicFormat.Raw))


def sign(signing_seed: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(signing_seed).sign(message)


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (_CryptoInvalidSignature, ValueError):
        return False
    return True


def _fingerprint(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()[:16]


class OperationMode(enum.IntEnum):
    OFF = 0
    ADVISORY = 1
    FULL_LOCK = 2

    @classmethod
    def parse(cls, text: str) -> "OperationMode":
        key = text.strip().upper().replace("-", "_").replace(" ", "_")
        if key == "FULLLOCK":
            key = "FULL_LOCK"
        try:
            return cls[key]
        except KeyError:
            raise ValidationError(f"unknown operation mode {text!r}") from None


def _read_mode(r: Reader) -> OperationMode:
    start = r.pos
    v = r.u8("mode")
    try:
        return OperationMode(v)
    except ValueError:
        raise DecodeError(start, f"unknown operation mode {v}") from None


def _read_policy(r: Reader) -> AccessPolicy:
    start = r.pos
    text = r.str16("policy")
    try:
        return parse_policy(text)
    except ValidationError as exc:
        raise DecodeError(start, f"policy: {exc}") from None


# -- certificates ----------------------------------------------------------

@dataclass(frozen=True)
class ZoneCertificate:
    zone_id: int
    sza_public_key: bytes
    signature: bytes

    @staticmethod
    def signed_message(zone_id: int, sza_public_key: bytes) -> bytes:
        return zone_id.to_bytes(4, "big") + sza_public_key

    def verify(self, ca_public_key: bytes) -> bool:
        return verify_signature(ca_public_key, self.signature,
                                self.signed_message(self.zone_id, self.sza_public_key))

    def to_bytes(self) -> bytes:
        return (Writer().raw(CERT_MAGIC).u32(self.zone_id)
                .blob16(self.sza_public_key).blob16(self.signature).getvalue())

    @classmethod
    def read(cls, r: Reader) -> "ZoneCertificate":
        r.expect(CERT_MAGIC, "certificate magic")
        return cls(r.u32("zone id"), r.blob16("SZA public key"), r.blob16("signature"))

    @classmethod
    def from_bytes(cls, data: bytes) -> "ZoneCertificate":
        r = Reader(data)
        cert = cls.read(r)
        r.done()
        return cert


def self_signed_certificate(zone_id: int, signing_seed: bytes) -> ZoneCertificate:
    """A certificate the SZA signs for itself.  Never verifies under a real CA."""
    pub = public_key_bytes(signing_seed)
    return ZoneCertificate(zone_id, pub, sign(signing_seed, ZoneCertificate.signed_message(zone_id, pub)))


# -- provisioning bundle ---------------------------------------------------

@dataclass(frozen=True)
class ProvisioningBundle:
    """What the CA hands a newly registered SZA."""
    certificate: ZoneCertificate
    system_pk: SystemPublicKey
    token_seed: bytes
    token_params: TokenParams
    policy: AccessPolicy

    def to_bytes(self) -> bytes:
        return (Writer().raw(BUNDLE_MAGIC)
                .blob16(self.certificate.to_bytes())
                .blob16(self.system_pk.to_bytes())
                .blob16(self.token_seed)
                .raw(self.token_params.to_bytes())
                .str16(print_policy(self.policy))
                .getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProvisioningBundle":
        r = Reader(data)
        r.expect(BUNDLE_MAGIC, "bundle magic")
        cert = ZoneCertificate.from_bytes(r.blob16("certificate"))
        pk = SystemPublicKey.from_bytes(r.blob16("system public key"))
        seed = r.blob16("token seed")
        params = TokenParams.read(r)
        policy = _read_policy(r)
        r.done()
        return cls(cert, pk, seed, params, policy)


# -- SZA -------------------------------------------------------------------

@dataclass(frozen=True)
class SzaState:
    zone_id: int
    signing_seed: bytes
    certificate: ZoneCertificate | None = None
    system_pk: SystemPublicKey | None = None
    token_seed: bytes | None = None
    token_params: TokenParams | None = None
    policy: AccessPolicy | None = None

    @property
    def public_key(self) -> bytes:
        return public_key_bytes(self.signing_seed)

    @property
    def provisioned(self) -> bool:
        return None not in (self.certificate, self.system_pk, self.token_seed,
                            self.token_params, self.policy)

    def require_provisioned(self) -> None:
        if not self.provisioned:
            raise NotProvisioned(f"zone {self.zone_id} has not been provisioned by a CA")

    def __repr__(self) -> str:
        return f"SzaState(zone_id={self.zone_id}, provisioned={self.provisioned})"

    def to_bytes(self) -> bytes:
        w = Writer().raw(ZONE_MAGIC).u32(self.zone_id).blob16(self.signing_seed)
        if not self.provisioned:
            return w.u8(0).getvalue()
        return (w.u8(1)
                .blob16(self.certificate.to_bytes())
                .blob16(self.system_pk.to_bytes())
                .blob16(self.token_seed)
                .raw(self.token_params.to_bytes())
                .str16(print_policy(self.policy))
                .getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SzaState":
        r = Reader(data)
        r.expect(ZONE_MAGIC, "zone file magic")
        zone_id = r.u32("zone id")
        seed = r.blob16("signing key")
        start = r.pos
        flag = r.u8("provisioned flag")
        if flag == 0:
            r.done()
            return cls(zone_id, seed)
        if flag != 1:
            raise DecodeError(start, f"bad provisioned flag {flag}")
        cert = ZoneCertificate.from_bytes(r.blob16("certificate"))
        pk = SystemPublicKey.from_bytes(r.blob16("system public key"))
        tseed = r.blob16("token seed")
        params = TokenParams.read(r)
        policy = _read_policy(r)
        r.done()
        return cls(zone_id, seed, cert, pk, tseed, params, policy)


def sza_init(zone_id: int, rng=None) -> SzaState:
    """Fresh SZA with its own signing keypair, not yet registered."""
    rng = rng or random.SystemRandom()
    if not 0 <= zone_id < 2**32:
        raise ValidationError("zone id must fit in 32 unsigned bits")
    return SzaState(zone_id, rng.randbytes(SIGNING_SEED_BYTES))


def provision(sza: SzaState, bundle: ProvisioningBundle) -> SzaState:
    cert = bundle.certificate
    if cert.zone_id != sza.zone_id or cert.sza_public_key != sza.public_key:
        raise ValidationError("certificate does not match this SZA's zone id and key")
    return replace(sza, certificate=cert, system_pk=bundle.system_pk,
                   token_seed=bundle.token_seed, token_params=bundle.token_params,
                   policy=bundle.policy)


# -- firearm keystore ------------------------------------------------------

@dataclass(frozen=True)
class TpdKeystore:
    usk: UserSecretKey
    ca_public_key: bytes
    token_seed: bytes
    token_params: TokenParams
    mode: OperationMode = OperationMode.ADVISORY

    def __repr__(self) -> str:
        return f"TpdKeystore({self.usk!r}, mode={self.mode.name})"

    def to_bytes(self) -> bytes:
        return (Writer().raw(KEYSTORE_MAGIC)
                .blob32(self.usk.to_bytes())
                .blob16(self.ca_public_key)
                .blob16(self.token_seed)
                .raw(self.token_params.to_bytes())
                .u8(int(self.mode))
                .getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "TpdKeystore":
        r = Reader(data)
        r.expect(KEYSTORE_MAGIC, "keystore magic")
        start = r.pos
        usk_bytes = r.blob32("user key")
        try:
            usk = UserSecretKey.from_bytes(usk_bytes)
        except DecodeError as exc:
            raise DecodeError(start + 4 + exc.offset, exc.reason) from None
        ca_pub = r.blob16("CA public key")
        seed = r.blob16("token seed")
        params = TokenParams.read(r)
        mode = _read_mode(r)
        r.done()
        return cls(usk, ca_pub, seed, params, mode)

    def with_mode(self, mode: OperationMode) -> "TpdKeystore":
        return replace(self, mode=mode)


# -- central authority -----------------------------------------------------

@dataclass
class FirearmRecord:
    firearm_id: int
    user_id: int
    serial: int
    expiration_et: int
    attributes: frozenset[Attribute]
    key_fingerprint: bytes
    superseded: bool = False


@dataclass
class ZoneRecord:
    certificate: ZoneCertificate
    policy: AccessPolicy


@dataclass
class CentralAuthority:
    """CA state.  Single writer: callers serialize mutating operations."""

    system_pk: SystemPublicKey
    msk: MasterSecretKey
    signing_seed: bytes
    token_seed: bytes
    token_params: TokenParams = field(default_factory=TokenParams)
    universe: set[Attribute] = field(default_factory=set)
    zones: dict[int, ZoneRecord] = field(default_factory=dict)
    firearms: list[FirearmRecord] = field(default_factory=list)

    def __repr__(self) -> str:
        return (f"CentralAuthority(backend={self.system_pk.backend_id}, "
                f"attributes={len(self.universe)}, zones={len(self.zones)}, "
                f"firearms={len(self.firearms)})")

    @property
    def public_key(self) -> bytes:
        return public_key_bytes(self.signing_seed)

    def active_record(self, firearm_id: int, user_id: int) -> FirearmRecord | None:
        for rec in self.firearms:
            if rec.firearm_id == firearm_id and rec.user_id == user_id and not rec.superseded:
                return rec
        return None

    def to_bytes(self) -> bytes:
        be = self.system_pk.backend
        w = (Writer().raw(REGISTRY_MAGIC)
             .blob16(self.system_pk.to_bytes())
             .blob16(be.scalar_to_bytes(self.msk.beta))
             .blob16(be.scalar_to_bytes(self.msk.alpha))
             .blob16(self.signing_seed)
             .blob16(self.token_seed)
             .raw(self.token_params.to_bytes()))
        w.u32(len(self.universe))
        for a in sorted(self.universe):
            w.str16(a)
        w.u32(len(self.zones))
        for zid in sorted(self.zones):
            rec = self.zones[zid]
            w.blob16(rec.certificate.to_bytes()).str16(print_policy(rec.policy))
        w.u32(len(self.firearms))
        for f in self.firearms:
            w.u64(f.firearm_id).u64(f.user_id).u32(f.serial).u64(f.expiration_et)
            w.u16(len(f.attributes))
            for a in sorted(f.attributes):
                w.str16(a)
            w.blob16(f.key_fingerprint).u8(int(f.superseded))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CentralAuthority":
        r = Reader(data)
        r.expect(REGISTRY_MAGIC, "registry magic")
        pk = SystemPublicKey.from_bytes(r.blob16("system public key"))
        be = pk.backend
        beta = be.scalar_from_bytes(r.blob16("beta"))
        alpha = be.scalar_from_bytes(r.blob16("alpha"))
        signing_seed = r.blob16("CA signing key")
        token_seed = r.blob16("token seed")
        params = TokenParams.read(r)
        universe = set()
        for _ in range(r.u32("attribute count")):
            start = r.pos
            try:
                universe.add(Attribute(r.str16("attribute")))
            except ValidationError as exc:
                raise DecodeError(start, str(exc)) from None
        zones = {}
        for _ in range(r.u32("zone count")):
            cert = ZoneCertificate.from_bytes(r.blob16("certificate"))
            zones[cert.zone_id] = ZoneRecord(cert, _read_policy(r))
        firearms = []
        for _ in range(r.u32("firearm count")):
            fid, uid, serial, et = r.u64(), r.u64(), r.u32(), r.u64()
            attrs = frozenset(Attribute(r.str16("attribute")) for _ in range(r.u16()))
            fp = r.blob16("fingerprint")
            firearms.append(FirearmRecord(fid, uid, serial, et, attrs, fp, bool(r.u8())))
        r.done()
        return cls(pk, MasterSecretKey(beta, alpha), signing_seed, token_seed, params,
                   universe, zones, firearms)


def ca_init(backend: str = "transparent", bits: int = 255, rng=None,
            token_params: TokenParams | None = None) -> CentralAuthority:
    rng = rng or random.SystemRandom()
    pk, msk = abe.setup(backend, bits, rng)
    signing_seed = rng.randbytes(SIGNING_SEED_BYTES)
    token_seed = rng.randbytes(TOKEN_SEED_BYTES)
    return CentralAuthority(pk, msk, signing_seed, token_seed, token_params or TokenParams())


def define_attribute(ca: CentralAuthority, *names: str) -> None:
    for name in names:
        ca.universe.add(Attribute(name))


def register_sza(ca: CentralAuthority, zone_id: int, sza_public_key: bytes,
                 zone_policy: AccessPolicy | str) -> tuple[ZoneCertificate, ProvisioningBundle]:
    if isinstance(zone_policy, str):
        zone_policy = parse_policy(zone_policy)
    if not 0 <= zone_id < 2**32:
        raise ValidationError("zone id must fit in 32 unsigned bits")
    if zone_id in ca.zones:
        raise DuplicateZoneId(f"zone id {zone_id} is already registered")
    unknown = zone_policy.attributes() - ca.universe
    if unknown:
        raise UnknownAttributeInPolicy(f"policy names undefined attributes: {', '.join(sorted(unknown))}")
    if len(sza_public_key) != 32:
        raise ValidationError("SZA public key must be a 32-byte Ed25519 key")
    msg = ZoneCertificate.signed_message(zone_id, sza_public_key)
    cert = ZoneCertificate(zone_id, bytes(sza_public_key), sign(ca.signing_seed, msg))
    ca.zones[zone_id] = ZoneRecord(cert, zone_policy)
    return cert, ProvisioningBundle(cert, ca.system_pk, ca.token_seed, ca.token_params, zone_policy)


def _issue(ca: CentralAuthority, firearm_id: int, user_id: int, attrs: Iterable[str],
           expiration_et: int, rng, now: int | None, mode: OperationMode) -> TpdKeystore:
    attrs = frozenset(Attribute(a) for a in attrs)
    unknown = attrs - ca.universe
    if unknown:
        raise UnknownAttribute(f"undefined attributes: {', '.join(sorted(unknown))}")
    usk = abe.keygen(ca.msk, ca.system_pk, firearm_id, user_id, expiration_et, attrs,
                     rng or random.SystemRandom(), issued_at=now)
    serial = 1
    for rec in ca.firearms:
        if rec.firearm_id == firearm_id and rec.user_id == user_id:
            serial = max(serial, rec.serial + 1)
            rec.superseded = True
    ca.firearms.append(FirearmRecord(firearm_id, user_id, serial, expiration_et, attrs,
                                     _fingerprint(usk.to_bytes())))
    return TpdKeystore(usk, ca.public_key, ca.token_seed, ca.token_params, mode)


def register_firearm(ca: CentralAuthority, firearm_id: int, user_id: int, attrs: Iterable[str],
                     expiration_et: int, rng=None, *, now: int | None = None,
                     mode: OperationMode = OperationMode.ADVISORY) -> TpdKeystore:
    """Issue a keystore.  Re-registering a (firearm, user) pair supersedes its old key."""
    return _issue(ca, firearm_id, user_id, attrs, expiration_et, rng, now, mode)


def renew_key(ca: CentralAuthority, firearm_id: int, user_id: int, new_attrs: Iterable[str],
              new_et: int, rng=None, *, now: int | None = None,
              mode: OperationMode = OperationMode.ADVISORY) -> TpdKeystore:
    if not any(r.firearm_id == firearm_id and r.user_id == user_id for r in ca.firearms):
        raise UnknownFirearm(f"firearm {firearm_id} / user {user_id} was never registered")
    return _issue(ca, firearm_id, user_id, new_attrs, new_et, rng, now, mode)


__all__ = [
    "CentralAuthority", "FirearmRecord", "OperationMode", "ProvisioningBundle", "SzaState",
    "TpdKeystore", "ZoneCertificate", "ZoneRecord", "ca_init", "define_attribute",
    "provision", "register_firearm", "register_sza", "renew_key", "self_signed_certificate",
    "sign", "sza_init", "verify_signature", "check_seed",
]
