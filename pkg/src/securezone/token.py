"""Time-stepped one-time tokens (TOTP-style) and windowed verification.

The default mode emits the first 8 raw bytes of ``HMAC-SHA256(seed, step)``;
tokens are key material, not something a person types.  ``mode="rfc6238"``
applies HOTP dynamic truncation to 8 decimal digits so the published TOTP
test vectors can be reproduced; the digits come back as 8 ASCII bytes.
"""

from __future__ import annotations

import hmac
import struct
from dataclasses import dataclass

from .errors import ClockBeforeEpoch, DecodeError, ValidationError
from .wire import Reader, Writer

TOKEN_BYTES = 8
DEFAULT_SKEW = 1
MAC_ALGORITHMS = ("sha1", "sha256", "sha512")
MODES = ("raw", "rfc6238")


@dataclass(frozen=True)
class TokenParams:
    period_seconds: int = 30
    epoch_t0: int = 0
    mac_algorithm: str = "sha256"
    mode: str = "raw"
    token_bytes: int = TOKEN_BYTES

    def __post_init__(self) -> None:
        if self.period_seconds < 1:
            raise ValidationError("token period must be at least one second")
        if self.epoch_t0 < 0:
            raise ValidationError("token epoch must be non-negative")
        if self.mac_algorithm not in MAC_ALGORITHMS:
            raise ValidationError(f"unknown MAC algorithm {self.mac_algorithm!r}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown token mode {self.mode!r}")
        if self.token_bytes != TOKEN_BYTES:
            raise ValidationError("tokens are 8 bytes")

    def to_bytes(self) -> bytes:
        return (Writer().u32(self.period_seconds).u64(self.epoch_t0)
                .str16(self.mac_algorithm).str16(self.mode).u8(self.token_bytes)
                .getvalue())

    @classmethod
    def read(cls, r: Reader) -> "TokenParams":
        start = r.pos
        period = r.u32("token period")
        t0 = r.u64("token epoch")
        mac = r.str16("mac algorithm")
        mode = r.str16("token mode")
        nbytes = r.u8("token size")
        try:
            return cls(period, t0, mac, mode, nbytes)
        except ValidationError as exc:
            raise DecodeError(start, str(exc)) from None


def check_seed(seed: bytes) -> bytes:
    if not 16 <= len(seed) <= 64:
        raise ValidationError(f"token seed must be 16-64 bytes, got {len(seed)}")
    return bytes(seed)


def step_at(params: TokenParams, now: int) -> int:
    if now < params.epoch_t0:
        raise ClockBeforeEpoch(f"clock {now} precedes token epoch {params.epoch_t0}")
    return (now - params.epoch_t0) // params.period_seconds


def token_at(seed: bytes, params: TokenParams, step: int) -> bytes:
    mac = hmac.new(seed, struct.pack(">Q", step), params.mac_algorithm).digest()
    if params.mode == "raw":
        return mac[:TOKEN_BYTES]
    offset = mac[-1] & 0x0F
    code = struct.unpack(">I", mac[offset:offset + 4])[0] & 0x7FFFFFFF
    return b"%08d" % (code % 10**8)


def window(current: int, skew: int) -> list[int]:
    """Candidate steps, current first, then outward: c, c-1, c+1, c-2, c+2..."""
    steps = [current]
    for d in range(1, skew + 1):
        steps += [current - d, current + d]
    return [s for s in steps if s >= 0]


def verify_token(seed: bytes, params: TokenParams, candidate: bytes, now: int,
                 skew_steps: int = DEFAULT_SKEW) -> int | None:
    """Step whose token equals ``candidate``, or ``None`` when nothing in the window matches."""
    if not 0 <= skew_steps <= 2:
        raise ValidationError("skew must be between 0 and 2 steps")
    for step in window(step_at(params, now), skew_steps):
        if hmac.compare_digest(token_at(seed, params, step), candidate):
            return step
    return None
