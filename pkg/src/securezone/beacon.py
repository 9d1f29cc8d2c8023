"""Secure Zone beacons: layered construction, wire format, and the receiver's check ladder.

Layering, innermost first::

    attestation = Sign_SZA(SHA-256(tk))
    inner       = attestation || zone certificate || ts || payload
    sealed      = AES-GCM(KDF(tk), inner)                 # token layer
    abe_ct      = CP-ABE encrypt(zone policy, sealed)     # attribute layer
    beacon      = "SZB1" || 0x01 || zone_id || policy || abe_ct

The token ``tk`` itself never goes on the air.  A receiver regenerates it
from the shared seed and its own clock.
"""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import abe
from .abe import AbeCiphertext, SystemPublicKey
from .errors import (
    ClockBeforeEpoch,
    DecodeError,
    IntegrityFailure,
    PayloadTooLarge,
    PolicyNotSatisfied,
)
from .pki import SzaState, TpdKeystore, ZoneCertificate, sign, verify_signature
from .policy import AccessPolicy, print_policy
from .token import DEFAULT_SKEW, step_at, token_at, window
from .wire import Reader, Writer

MAGIC = b"SZB1"
VERSION = 1
HEADER_SIZE = len(MAGIC) + 1 + 4
MAX_PAYLOAD = 1024
INNER_VERSION = 1
NONCE_SIZE = 12


class VerdictKind(enum.Enum):
    SAFE_TO_OPERATE = "SafeToOperate"
    ALERT_POLICY_UNSATISFIED = "AlertPolicyUnsatisfied"
    ALERT_TOKEN_MISMATCH = "AlertTokenMismatch"
    ALERT_KEY_EXPIRED = "AlertKeyExpired"
    ALERT_INVALID_AUTHORITY = "AlertInvalidAuthority"
    ALERT_INVALID_MESSAGE = "AlertInvalidMessage"

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES[self]

    @property
    def is_safe(self) -> bool:
        return self is VerdictKind.SAFE_TO_OPERATE

    def __str__(self) -> str:
        return self.value


_EXIT_CODES = {
    VerdictKind.SAFE_TO_OPERATE: 0,
    VerdictKind.ALERT_POLICY_UNSATISFIED: 10,
    VerdictKind.ALERT_TOKEN_MISMATCH: 11,
    VerdictKind.ALERT_KEY_EXPIRED: 12,
    VerdictKind.ALERT_INVALID_AUTHORITY: 13,
    VerdictKind.ALERT_INVALID_MESSAGE: 14,
}


@dataclass(frozen=True)
class BeaconPayload:
    zone_name: str
    advisory_text: str = ""

    def __post_init__(self) -> None:
        size = len(self.zone_name.encode()) + len(self.advisory_text.encode())
        if size > MAX_PAYLOAD:
            raise PayloadTooLarge(f"beacon payload is {size} bytes; limit is {MAX_PAYLOAD}")

    def to_bytes(self) -> bytes:
        return Writer().str16(self.zone_name).str16(self.advisory_text).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "BeaconPayload":
        start = r.pos
        name = r.str16("zone name")
        text = r.str16("advisory text")
        try:
            return cls(name, text)
        except PayloadTooLarge as exc:
            raise DecodeError(start, str(exc)) from None


@dataclass(frozen=True)
class InnerEnvelope:
    token_attestation: bytes
    zone_certificate: ZoneCertificate
    timestamp_ts: int
    payload: BeaconPayload

    def to_bytes(self) -> bytes:
        return (Writer().u8(INNER_VERSION)
                .blob16(self.token_attestation)
                .blob16(self.zone_certificate.to_bytes())
                .u64(self.timestamp_ts)
                .raw(self.payload.to_bytes())
                .getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "InnerEnvelope":
        r = Reader(data)
        if r.u8("inner version") != INNER_VERSION:
            raise DecodeError(0, "unsupported inner envelope version")
        att = r.blob16("attestation")
        cert = ZoneCertificate.from_bytes(r.blob16("certificate"))
        ts = r.u64("timestamp")
        payload = BeaconPayload.read(r)
        r.done()
        return cls(att, cert, ts, payload)


@dataclass(frozen=True)
class BeaconMessage:
    zone_id: int
    policy: AccessPolicy
    abe_ct: AbeCiphertext

    def __post_init__(self) -> None:
        if self.abe_ct.policy != self.policy:
            raise ValueError("header policy differs from the ciphertext policy")


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    detail: str = ""
    payload: BeaconPayload | None = None
    matched_step: int | None = None

    @property
    def is_safe(self) -> bool:
        return self.kind.is_safe


# -- wire format -----------------------------------------------------------

def encode_beacon(b: BeaconMessage) -> bytes:
    return (Writer().raw(MAGIC).u8(VERSION).u32(b.zone_id)
            .str16(print_policy(b.policy))
            .blob32(b.abe_ct.to_bytes())
            .getvalue())


def decode_beacon(data: bytes) -> BeaconMessage:
    r = Reader(data)
    if len(data) < HEADER_SIZE:
        raise DecodeError(len(data), f"buffer shorter than {HEADER_SIZE}-byte header")
    r.expect(MAGIC, "beacon magic")
    start = r.pos
    version = r.u8("version")
    if version != VERSION:
        raise DecodeError(start, f"unknown beacon version {version}")
    zone_id = r.u32("zone id")
    start = r.pos
    text = r.str16("policy")
    ct_len_at = r.pos
    ct_bytes = r.blob32("ABE ciphertext")
    r.done()
    try:
        ct = AbeCiphertext.from_bytes(ct_bytes)
    except DecodeError as exc:
        raise DecodeError(ct_len_at + 4 + exc.offset, exc.reason) from None
    if text != print_policy(ct.policy):
        raise DecodeError(start, "header policy differs from the ciphertext policy")
    return BeaconMessage(zone_id, ct.policy, ct)


def abe_region(data: bytes) -> tuple[int, int]:
    """``(start, end)`` byte offsets of the serialized ABE ciphertext inside an encoded beacon."""
    plen = int.from_bytes(data[HEADER_SIZE:HEADER_SIZE + 2], "big")
    start = HEADER_SIZE + 2 + plen + 4
    return start, start + int.from_bytes(data[start - 4:start], "big")


# -- building --------------------------------------------------------------

def token_digest(tk: bytes) -> bytes:
    return hashlib.sha256(tk).digest()


def attest_token(signing_seed: bytes, tk: bytes) -> bytes:
    return sign(signing_seed, token_digest(tk))


def seal_inner(tk: bytes, inner: InnerEnvelope, rng) -> bytes:
    nonce = rng.randbytes(NONCE_SIZE)
    return nonce + AESGCM(abe.kdf(tk, b"token")).encrypt(nonce, inner.to_bytes(), MAGIC)


def open_inner(tk: bytes, sealed: bytes) -> bytes:
    if len(sealed) < NONCE_SIZE + 16:
        raise IntegrityFailure("token layer too short")
    try:
        return AESGCM(abe.kdf(tk, b"token")).decrypt(sealed[:NONCE_SIZE], sealed[NONCE_SIZE:], MAGIC)
    except InvalidTag:
        raise IntegrityFailure("token layer authentication failed") from None


def assemble_beacon(zone_id: int, policy: AccessPolicy, system_pk: SystemPublicKey,
                    sealed: bytes, rng) -> BeaconMessage:
    return BeaconMessage(zone_id, policy, abe.encrypt(system_pk, policy, sealed, rng))


def build_beacon(sza: SzaState, payload: BeaconPayload, now: int, rng=None) -> BeaconMessage:
    sza.require_provisioned()
    rng = rng or random.SystemRandom()
    tk = token_at(sza.token_seed, sza.token_params, step_at(sza.token_params, now))
    inner = InnerEnvelope(attest_token(sza.signing_seed, tk), sza.certificate, now, payload)
    return assemble_beacon(sza.zone_id, sza.policy, sza.system_pk, seal_inner(tk, inner, rng), rng)


# -- verification ----------------------------------------------------------

def verify_beacon(keystore: TpdKeystore, beacon: BeaconMessage, now: int,
                  skew_steps: int = DEFAULT_SKEW) -> Verdict:
    """Run the receiver's checks in order; the first failing check decides the verdict."""
    try:
        sealed = abe.decrypt(keystore.usk, beacon.abe_ct)
    except PolicyNotSatisfied as exc:
        return Verdict(VerdictKind.ALERT_POLICY_UNSATISFIED, str(exc))
    except IntegrityFailure as exc:
        return Verdict(VerdictKind.ALERT_POLICY_UNSATISFIED, f"ABE decryption failed: {exc}")

    params = keystore.token_params
    try:
        steps = window(step_at(params, now), skew_steps)
    except ClockBeforeEpoch as exc:
        return Verdict(VerdictKind.ALERT_TOKEN_MISMATCH, str(exc))
    for step in steps:
        tk_u = token_at(keystore.token_seed, params, step)
        try:
            plain = open_inner(tk_u, sealed)
            break
        except IntegrityFailure:
            continue
    else:
        return Verdict(VerdictKind.ALERT_TOKEN_MISMATCH,
                       f"no token in steps {steps} opens the envelope")
    try:
        inner = InnerEnvelope.from_bytes(plain)
    except DecodeError as exc:
        return Verdict(VerdictKind.ALERT_INVALID_MESSAGE, f"inner envelope: {exc}")

    et = keystore.usk.expiration_et
    if et < inner.timestamp_ts:
        return Verdict(VerdictKind.ALERT_KEY_EXPIRED,
                       f"key expired at {et}, beacon timestamp {inner.timestamp_ts}")

    cert = inner.zone_certificate
    if not cert.verify(keystore.ca_public_key):
        return Verdict(VerdictKind.ALERT_INVALID_AUTHORITY,
                       f"certificate for zone {cert.zone_id} is not signed by the CA")
    if cert.zone_id != beacon.zone_id:
        return Verdict(VerdictKind.ALERT_INVALID_AUTHORITY,
                       f"certificate is for zone {cert.zone_id}, beacon claims {beacon.zone_id}")

    if not verify_signature(cert.sza_public_key, inner.token_attestation, token_digest(tk_u)):
        return Verdict(VerdictKind.ALERT_INVALID_MESSAGE, "token attestation does not verify")

    return Verdict(VerdictKind.SAFE_TO_OPERATE, f"zone {beacon.zone_id}", inner.payload, step)


def verify_beacon_bytes(keystore: TpdKeystore, data: bytes, now: int,
                        skew_steps: int = DEFAULT_SKEW) -> Verdict:
    try:
        beacon = decode_beacon(data)
    except DecodeError as exc:
        return Verdict(VerdictKind.ALERT_INVALID_MESSAGE, str(exc))
    return verify_beacon(keystore, beacon, now, skew_steps)
