"""Ciphertext-policy attribute-based encryption over an access tree.

Hybrid construction: the tree encapsulates a random target-group element
``M``; ``sha256(M)`` keys AES-256-GCM, which seals the payload.  The GCM
associated data is the serialized ciphertext header, so every byte of a
ciphertext is authenticated, including leaf components that a particular
decryptor never touches.

Key and ciphertext components, with ``g`` the generator, ``h = g^beta``,
``Y = e(g,g)^alpha`` and ``H`` hash-to-group::

    key:        D = g^((alpha + x) / beta)
                D_j = g^x * H(j)^r_j,   D'_j = g^r_j      for each attribute j
    ciphertext: C~ = M * Y^s,  C = h^s
                C_y = g^q_y(0),  C'_y = H(att(y))^q_y(0)  for each leaf y

where ``s`` is split down the tree with one Shamir polynomial per node.
The per-user ``x`` binds all attribute components of one key together, so
components lifted from different keys do not interpolate to anything useful.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .backend import GroupBackend, backend_from_ident, get_backend
from .errors import (
    DecodeError,
    EmptyAttributeSet,
    ExpirationInPast,
    IntegrityFailure,
    PolicyNotSatisfied,
    ValidationError,
)
from .policy import AccessPolicy, Attribute, Leaf, PolicyNode, parse_policy, print_policy, satisfies
from .wire import Reader, Writer

FORMAT_VERSION = 1
NONCE_SIZE = 12
U64_MAX = 2**64 - 1


def kdf(data: bytes, label: bytes = b"content") -> bytes:
    """256-bit key from ``data`` with a domain-separation label."""
    return hashlib.sha256(b"securezone/kdf/v1|" + label + b"|" + data).digest()


def _read_elem(r: Reader, decode, what: str):
    start = r.pos
    data = r.blob16(what)
    try:
        return decode(data)
    except DecodeError as exc:
        raise DecodeError(start, f"{what}: {exc.reason}") from None


def _read_backend(r: Reader) -> GroupBackend:
    start = r.pos
    ident = r.str16("backend id")
    try:
        return backend_from_ident(ident)
    except ValidationError as exc:
        raise DecodeError(start, str(exc)) from None


def _read_version(r: Reader, what: str) -> None:
    start = r.pos
    v = r.u8("version")
    if v != FORMAT_VERSION:
        raise DecodeError(start, f"unsupported {what} version {v}")


@dataclass(frozen=True)
class SystemPublicKey:
    backend_id: str
    g: int
    h: int
    egg_alpha: int

    @property
    def backend(self) -> GroupBackend:
        return backend_from_ident(self.backend_id)

    def to_bytes(self) -> bytes:
        be = self.backend
        return (Writer().u8(FORMAT_VERSION).str16(self.backend_id)
                .blob16(be.g_to_bytes(self.g))
                .blob16(be.g_to_bytes(self.h))
                .blob16(be.gt_to_bytes(self.egg_alpha))
                .getvalue())

    @classmethod
    def read(cls, r: Reader) -> "SystemPublicKey":
        _read_version(r, "public key")
        be = _read_backend(r)
        g = _read_elem(r, be.g_from_bytes, "g")
        h = _read_elem(r, be.g_from_bytes, "h")
        y = _read_elem(r, be.gt_from_bytes, "e(g,g)^alpha")
        return cls(be.ident, g, h, y)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SystemPublicKey":
        r = Reader(data)
        pk = cls.read(r)
        r.done()
        return pk


@dataclass(frozen=True)
class MasterSecretKey:
    beta: int
    alpha: int

    def __repr__(self) -> str:
        return "MasterSecretKey(<redacted>)"


@dataclass(frozen=True)
class UserSecretKey:
    backend_id: str
    firearm_id: int
    user_id: int
    randomizer_x: int
    expiration_et: int
    key_core: int
    components: Mapping[Attribute, tuple[int, int]] = field(default_factory=dict)

    @property
    def attributes(self) -> frozenset[Attribute]:
        return frozenset(self.components)

    def __repr__(self) -> str:
        return (f"UserSecretKey(firearm_id={self.firearm_id}, user_id={self.user_id}, "
                f"et={self.expiration_et}, attributes={sorted(self.components)})")

    def to_bytes(self) -> bytes:
        be = backend_from_ident(self.backend_id)
        w = (Writer().u8(FORMAT_VERSION).str16(self.backend_id)
             .u64(self.firearm_id).u64(self.user_id)
             .blob16(be.scalar_to_bytes(self.randomizer_x))
             .u64(self.expiration_et)
             .blob16(be.g_to_bytes(self.key_core))
             .u16(len(self.components)))
        for name in sorted(self.components):
            dj, dj2 = self.components[name]
            w.str16(name).blob16(be.g_to_bytes(dj)).blob16(be.g_to_bytes(dj2))
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "UserSecretKey":
        _read_version(r, "user key")
        be = _read_backend(r)
        fid = r.u64("firearm id")
        uid = r.u64("user id")
        x = _read_elem(r, be.scalar_from_bytes, "randomizer")
        et = r.u64("expiration")
        d = _read_elem(r, be.g_from_bytes, "key core")
        comps = {}
        for _ in range(r.u16("attribute count")):
            start = r.pos
            name = r.str16("attribute")
            try:
                attr = Attribute(name)
            except ValidationError as exc:
                raise DecodeError(start, str(exc)) from None
            if attr in comps:
                raise DecodeError(start, f"duplicate attribute {name}")
            comps[attr] = (_read_elem(r, be.g_from_bytes, "D_j"), _read_elem(r, be.g_from_bytes, "D'_j"))
        return cls(be.ident, fid, uid, x, et, d, comps)

    @classmethod
    def from_bytes(cls, data: bytes) -> "UserSecretKey":
        r = Reader(data)
        usk = cls.read(r)
        r.done()
        return usk


@dataclass(frozen=True)
class AbeCiphertext:
    backend_id: str
    policy: AccessPolicy
    c_tilde: int
    c: int
    leaves: tuple[tuple[int, int], ...]
    dem_ct: bytes

    def header_bytes(self) -> bytes:
        """Everything except the sealed payload; used as GCM associated data."""
        be = backend_from_ident(self.backend_id)
        w = (Writer().u8(FORMAT_VERSION).str16(self.backend_id)
             .str16(print_policy(self.policy))
             .blob16(be.gt_to_bytes(self.c_tilde))
             .blob16(be.g_to_bytes(self.c))
             .u16(len(self.leaves)))
        for cy, cy2 in self.leaves:
            w.blob16(be.g_to_bytes(cy)).blob16(be.g_to_bytes(cy2))
        return w.getvalue()

    def to_bytes(self) -> bytes:
        return self.header_bytes() + Writer().blob32(self.dem_ct).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "AbeCiphertext":
        _read_version(r, "ciphertext")
        be = _read_backend(r)
        start = r.pos
        text = r.str16("policy")
        try:
            policy = parse_policy(text)
        except ValidationError as exc:
            raise DecodeError(start, f"policy: {exc}") from None
        if print_policy(policy) != text:
            raise DecodeError(start, "policy string is not canonical")
        c_tilde = _read_elem(r, be.gt_from_bytes, "C~")
        c = _read_elem(r, be.g_from_bytes, "C")
        start = r.pos
        n = r.u16("leaf count")
        if n != len(policy.leaves()):
            raise DecodeError(start, f"leaf count {n} does not match policy ({len(policy.leaves())})")
        leaves = tuple(
            (_read_elem(r, be.g_from_bytes, "C_y"), _read_elem(r, be.g_from_bytes, "C'_y"))
            for _ in range(n))
        dem = r.blob32("sealed payload")
        return cls(be.ident, policy, c_tilde, c, leaves, dem)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AbeCiphertext":
        r = Reader(data)
        ct = cls.read(r)
        r.done()
        return ct


# -- algorithms ------------------------------------------------------------

def setup(backend: str = "transparent", bits: int = 255, rng=None) -> tuple[SystemPublicKey, MasterSecretKey]:
    rng = rng or random.SystemRandom()
    be = get_backend(backend, bits)
    beta = be.random_scalar(rng)
    alpha = be.random_scalar(rng)
    g = be.generator()
    pk = SystemPublicKey(be.ident, g, be.g_exp(g, beta), be.gt_exp(be.pair(g, g), alpha))
    return pk, MasterSecretKey(beta, alpha)


def keygen(msk: MasterSecretKey, pk: SystemPublicKey, firearm_id: int, user_id: int,
           expiration_et: int, attrs: Iterable[str], rng=None, *,
           issued_at: int | None = None) -> UserSecretKey:
    rng = rng or random.SystemRandom()
    attrs = sorted({Attribute(a) for a in attrs})
    if not attrs:
        raise EmptyAttributeSet("a user key needs at least one attribute")
    if issued_at is not None and expiration_et <= issued_at:
        raise ExpirationInPast(f"expiration {expiration_et} is not after issuance time {issued_at}")
    for name, v in (("firearm_id", firearm_id), ("user_id", user_id), ("expiration_et", expiration_et)):
        if not 0 <= v <= U64_MAX:
            raise ValidationError(f"{name} must fit in 64 unsigned bits")
    be = pk.backend
    p = be.order
    g = pk.g
    x = be.random_scalar(rng)
    d = be.g_exp(g, (msk.alpha + x) * pow(msk.beta, -1, p) % p)
    gx = be.g_exp(g, x)
    comps = {}
    for a in attrs:
        r = be.random_scalar(rng)
        comps[a] = (be.g_mul(gx, be.g_exp(be.hash_to_g(a), r)), be.g_exp(g, r))
    return UserSecretKey(be.ident, firearm_id, user_id, x, expiration_et, d, comps)


def _share(node: PolicyNode, secret: int, p: int, rng, out: list[int]) -> None:
    if isinstance(node, Leaf):
        out.append(secret)
        return
    coeffs = [secret] + [rng.randrange(p) for _ in range(node.k - 1)]
    for idx, child in enumerate(node.children, start=1):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * idx + c) % p
        _share(child, acc, p, rng, out)


def share_secret(policy: AccessPolicy, secret: int, p: int, rng) -> list[int]:
    """Per-leaf shares of ``secret`` in leaf order."""
    out: list[int] = []
    _share(policy.root, secret, p, rng, out)
    return out


def lagrange_at_zero(i: int, indices: Iterable[int], p: int) -> int:
    num, den = 1, 1
    for j in indices:
        if j != i:
            num = num * -j % p
            den = den * (i - j) % p
    return num * pow(den, -1, p) % p


def encrypt(pk: SystemPublicKey, policy: AccessPolicy, payload: bytes, rng=None) -> AbeCiphertext:
    rng = rng or random.SystemRandom()
    be = pk.backend
    p = be.order
    s = be.random_scalar(rng)
    m = be.gt_exp(be.pair(pk.g, pk.g), be.random_scalar(rng))
    c_tilde = be.gt_mul(m, be.gt_exp(pk.egg_alpha, s))
    c = be.g_exp(pk.h, s)
    leaves = tuple(
        (be.g_exp(pk.g, q), be.g_exp(be.hash_to_g(a), q))
        for a, q in zip(policy.leaves(), share_secret(policy, s, p, rng)))
    ct = AbeCiphertext(be.ident, policy, c_tilde, c, leaves, b"")
    nonce = rng.randbytes(NONCE_SIZE)
    sealed = AESGCM(kdf(be.gt_to_bytes(m))).encrypt(nonce, bytes(payload), ct.header_bytes())
    return AbeCiphertext(be.ident, policy, c_tilde, c, leaves, nonce + sealed)


def _decrypt_node(be: GroupBackend, usk: UserSecretKey, node: PolicyNode,
                  leaves, pos: list[int]):
    if isinstance(node, Leaf):
        i = pos[0]
        pos[0] += 1
        comp = usk.components.get(node.attribute)
        if comp is None:
            return None
        cy, cy2 = leaves[i]
        return be.gt_div(be.pair(comp[0], cy), be.pair(comp[1], cy2))
    got = {}
    for idx, child in enumerate(node.children, start=1):
        val = _decrypt_node(be, usk, child, leaves, pos)
        if val is not None and len(got) < node.k:
            got[idx] = val
    if len(got) < node.k:
        return None
    acc = None
    for idx, val in got.items():
        term = be.gt_exp(val, lagrange_at_zero(idx, got, be.order))
        acc = term if acc is None else be.gt_mul(acc, term)
    return acc


def decrypt(usk: UserSecretKey, ct: AbeCiphertext) -> bytes:
    if usk.backend_id != ct.backend_id:
        raise IntegrityFailure(f"key backend {usk.backend_id} does not match ciphertext {ct.backend_id}")
    if not satisfies(ct.policy, usk.attributes):
        raise PolicyNotSatisfied(
            f"attributes {sorted(usk.attributes)} do not satisfy {print_policy(ct.policy)}")
    be = backend_from_ident(ct.backend_id)
    a = _decrypt_node(be, usk, ct.policy.root, ct.leaves, [0])
    egg_alpha_s = be.gt_div(be.pair(ct.c, usk.key_core), a)
    m = be.gt_div(ct.c_tilde, egg_alpha_s)
    if len(ct.dem_ct) < NONCE_SIZE + 16:
        raise IntegrityFailure("sealed payload too short")
    nonce, sealed = ct.dem_ct[:NONCE_SIZE], ct.dem_ct[NONCE_SIZE:]
    try:
        return AESGCM(kdf(be.gt_to_bytes(m))).decrypt(nonce, sealed, ct.header_bytes())
    except InvalidTag:
        raise IntegrityFailure("authenticated decryption failed") from None


__all__ = [
    "AbeCiphertext", "MasterSecretKey", "SystemPublicKey", "UserSecretKey",
    "setup", "keygen", "encrypt", "decrypt", "kdf", "share_secret", "lagrange_at_zero",
]
