"""Bilinear group backends for the ABE engine.

Only the transparent backend ships.  Its group elements are their own
discrete logarithms modulo a prime ``p``: combining elements adds exponents,
exponentiation multiplies them, and the pairing multiplies two source
exponents into a target exponent.  Every algebraic identity the scheme
relies on holds exactly, which makes it ideal for testing the protocol, and
it offers no secrecy whatsoever.  A real pairing library can be plugged in
by subclassing :class:`GroupBackend` and calling :func:`register_backend`.
"""

from __future__ import annotations

import abc
import hashlib
from typing import Any

from .errors import DecodeError, UnsupportedBackend

# named prime orders for the transparent backend, keyed by bit size
PRIMES = {
    61: 2**61 - 1,
    127: 2**127 - 1,
    255: 2**255 - 19,
}


class GroupBackend(abc.ABC):
    """Source group G, target group GT, scalars mod ``order``.

    Elements are opaque to callers; only the backend combines, serializes
    and pairs them.
    """

    name: str
    order: int

    @abc.abstractmethod
    def generator(self) -> Any: ...

    @abc.abstractmethod
    def g_mul(self, a: Any, b: Any) -> Any: ...

    @abc.abstractmethod
    def g_exp(self, a: Any, k: int) -> Any: ...

    @abc.abstractmethod
    def gt_mul(self, a: Any, b: Any) -> Any: ...

    @abc.abstractmethod
    def gt_exp(self, a: Any, k: int) -> Any: ...

    @abc.abstractmethod
    def gt_inv(self, a: Any) -> Any: ...

    @abc.abstractmethod
    def pair(self, a: Any, b: Any) -> Any: ...

    @abc.abstractmethod
    def hash_to_g(self, name: str) -> Any: ...

    @abc.abstractmethod
    def g_to_bytes(self, a: Any) -> bytes: ...

    @abc.abstractmethod
    def g_from_bytes(self, data: bytes) -> Any: ...

    @abc.abstractmethod
    def gt_to_bytes(self, a: Any) -> bytes: ...

    @abc.abstractmethod
    def gt_from_bytes(self, data: bytes) -> Any: ...

    @property
    def element_size(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def scalar_to_bytes(self, k: int) -> bytes:
        return k.to_bytes((self.order.bit_length() + 7) // 8, "big")

    def scalar_from_bytes(self, data: bytes) -> int:
        if len(data) != (self.order.bit_length() + 7) // 8:
            raise DecodeError(0, "scalar has wrong length")
        k = int.from_bytes(data, "big")
        if k >= self.order:
            raise DecodeError(0, "scalar out of range")
        return k

    def random_scalar(self, rng, nonzero: bool = True) -> int:
        return rng.randrange(1 if nonzero else 0, self.order)

    def gt_div(self, a: Any, b: Any) -> Any:
        return self.gt_mul(a, self.gt_inv(b))

    @property
    def ident(self) -> str:
        return f"{self.name}-{self.order.bit_length()}"


class TransparentBackend(GroupBackend):
    """Exponent-carrying test group.  Insecure by design."""

    name = "transparent"

    def __init__(self, bits: int = 255) -> None:
        try:
            self.order = PRIMES[bits]
        except KeyError:
            raise UnsupportedBackend(
                f"transparent backend has no {bits}-bit prime; choose from {sorted(PRIMES)}") from None
        self.bits = bits

    def generator(self) -> int:
        return 1

    def g_mul(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def g_exp(self, a: int, k: int) -> int:
        return a * k % self.order

    gt_mul = g_mul
    gt_exp = g_exp

    def gt_inv(self, a: int) -> int:
        return -a % self.order

    def pair(self, a: int, b: int) -> int:
        return a * b % self.order

    def hash_to_g(self, name: str) -> int:
        counter = 0
        while True:
            h = hashlib.sha256(b"securezone/h2g/v1|%d|" % counter + name.encode()).digest()
            v = int.from_bytes(h, "big") % self.order
            if v:
                return v
            counter += 1

    def g_to_bytes(self, a: int) -> bytes:
        return a.to_bytes(self.element_size, "big")

    def g_from_bytes(self, data: bytes) -> int:
        if len(data) != self.element_size:
            raise DecodeError(0, f"element must be {self.element_size} bytes")
        v = int.from_bytes(data, "big")
        if v >= self.order:
            raise DecodeError(0, "non-canonical group element")
        return v

    gt_to_bytes = g_to_bytes
    gt_from_bytes = g_from_bytes

    @property
    def ident(self) -> str:
        return f"transparent-{self.bits}"


_REGISTRY: dict[str, type[GroupBackend]] = {"transparent": TransparentBackend}
_CACHE: dict[str, GroupBackend] = {}


def register_backend(name: str, cls: type[GroupBackend]) -> None:
    _REGISTRY[name] = cls


def get_backend(name: str = "transparent", bits: int = 255) -> GroupBackend:
    key = f"{name}-{bits}"
    if key not in _CACHE:
        try:
            cls = _REGISTRY[name]
        except KeyError:
            raise UnsupportedBackend(f"unknown group backend {name!r}") from None
        _CACHE[key] = cls(bits)
    return _CACHE[key]


def backend_from_ident(ident: str) -> GroupBackend:
    """Resolve ``"<name>-<bits>"`` as written into serialized keys."""
    name, _, bits = ident.rpartition("-")
    if not name or not bits.isdigit():
        raise UnsupportedBackend(f"malformed backend id {ident!r}")
    return get_backend(name, int(bits))
