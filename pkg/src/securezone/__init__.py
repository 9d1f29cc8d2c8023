"""Secure Zones: attribute-based encrypted beacons that tell firearms where they may operate."""

from .abe import AbeCiphertext, MasterSecretKey, SystemPublicKey, UserSecretKey, decrypt, encrypt, keygen, setup
from .beacon import (
    BeaconMessage,
    BeaconPayload,
    InnerEnvelope,
    Verdict,
    VerdictKind,
    build_beacon,
    decode_beacon,
    encode_beacon,
    verify_beacon,
    verify_beacon_bytes,
)
from .pki import (
    CentralAuthority,
    OperationMode,
    SzaState,
    TpdKeystore,
    ZoneCertificate,
    ca_init,
    define_attribute,
    provision,
    register_firearm,
    register_sza,
    renew_key,
    sza_init,
)
from .policy import AccessPolicy, Attribute, Leaf, Threshold, parse_policy, print_policy, satisfies
from .token import TokenParams, step_at, token_at, verify_token

__version__ = "0.1.0"
