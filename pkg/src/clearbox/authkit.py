"""Identity tokens for the transparency toolchain.

A minimal development authority issues Ed25519-signed JWTs binding a subject
to a role (owner, consumer, admin). The safekeeper verifies them with the
authority's public key, so every usage report and every query is tied to a
verified principal rather than a client-asserted one. In a real deployment
the issuing side is an existing single sign-on service; the verification side
is what matters here.

The algorithm is pinned to EdDSA. There is no negotiation: a token whose
header names any other algorithm is rejected outright.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

__all__ = [
    "Role",
    "Claims",
    "AuthorityKeyPair",
    "TokenError",
    "MalformedToken",
    "BadSignature",
    "ExpiredToken",
    "NotYetValid",
    "WrongAlgorithm",
    "keygen",
    "issue_token",
    "verify_token",
    "token_fingerprint",
    "save_verifying_key",
    "load_verifying_key",
    "save_keypair",
    "load_keypair",
    "IAT_SKEW_SECONDS",
]

#: Tolerance for issued-at timestamps from hosts slightly ahead of us.
IAT_SKEW_SECONDS = 60

_ALGORITHM = "EdDSA"
_TOKEN_TYPE = "JWT"
_B64URL_ALPHABET = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
)
_TO_STANDARD_B64 = str.maketrans("-_", "+/")


class Role(str, Enum):
    OWNER = "owner"
    CONSUMER = "consumer"
    ADMIN = "admin"


class TokenError(Exception):
    """Base class for token verification failures."""

    code = "token_error"


class MalformedToken(TokenError):
    code = "malformed"


class BadSignature(TokenError):
    code = "bad_signature"


class ExpiredToken(TokenError):
    code = "expired"


class NotYetValid(TokenError):
    code = "not_yet_valid"


class WrongAlgorithm(TokenError):
    code = "wrong_algorithm"


@dataclass(frozen=True)
class Claims:
    """The verified payload of an accepted token."""

    subject: str
    role: Role
    issuer: str
    issued_at: int
    expires_at: int


@dataclass(frozen=True)
class AuthorityKeyPair:
    """The development authority's Ed25519 material."""

    signing_key: Ed25519PrivateKey
    verifying_key: Ed25519PublicKey
    issuer_id: str


def keygen(issuer_id: str = "clearbox-dev-authority") -> AuthorityKeyPair:
    """Generate a fresh authority keypair."""
    signing_key = Ed25519PrivateKey.generate()
    return AuthorityKeyPair(signing_key, signing_key.public_key(), issuer_id)


def _b64url_encode(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def _b64url_decode_strict(segment: str) -> bytes:
    """Decode base64url, rejecting non-canonical encodings.

    Lenient decoders ignore trailing padding bits, letting several distinct
    strings decode to the same bytes; a mutated-but-still-verifying token must
    be impossible, so anything that does not round-trip is refused.
    """
    if not segment or not _B64URL_ALPHABET.issuperset(segment):
        raise MalformedToken("segment is not base64url")
    padded = segment.translate(_TO_STANDARD_B64) + "=" * (-len(segment) % 4)
    try:
        raw = base64.b64decode(padded, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise MalformedToken("segment is not base64url") from exc
    if _b64url_encode(raw) != segment:
        raise MalformedToken("segment is not canonical base64url")
    return raw


def issue_token(
    keypair: AuthorityKeyPair,
    subject: str,
    role: Union[Role, str],
    ttl_seconds: int,
    now: Optional[int] = None,
) -> str:
    """Issue a signed token for ``subject`` with the given role and lifetime.

    ``now`` is epoch seconds; defaults to the current time.
    """
    if not isinstance(subject, str) or not subject:
        raise ValueError("subject must be a nonempty string")
    if ttl_seconds <= 0:
        raise ValueError("ttl_seconds must be positive")
    role = Role(role)
    issued_at = int(time.time()) if now is None else int(now)
    header = {"alg": _ALGORITHM, "typ": _TOKEN_TYPE}
    payload = {
        "sub": subject,
        "role": role.value,
        "iss": keypair.issuer_id,
        "iat": issued_at,
        "exp": issued_at + int(ttl_seconds),
    }
    signing_input = ".".join(
        _b64url_encode(json.dumps(part, separators=(",", ":")).encode("utf-8"))
        for part in (header, payload)
    )
    signature = keypair.signing_key.sign(signing_input.encode("ascii"))
    return f"{signing_input}.{_b64url_encode(signature)}"


def _decode_json_segment(segment: str) -> dict:
    raw = _b64url_decode_strict(segment)
    try:
        decoded = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedToken("segment is not valid JSON") from exc
    if not isinstance(decoded, dict):
        raise MalformedToken("segment must be a JSON object")
    return decoded


def verify_token(
    verifying_key: Ed25519PublicKey,
    token: str,
    now: Optional[int] = None,
) -> Claims:
    """Verify a token and return its claims.

    Raises :class:`MalformedToken`, :class:`WrongAlgorithm`,
    :class:`BadSignature`, :class:`NotYetValid`, or :class:`ExpiredToken`.
    """
    if not isinstance(token, str):
        raise MalformedToken("token must be a string")
    parts = token.split(".")
    if len(parts) != 3:
        raise MalformedToken("token must have three dot-separated segments")
    header_b64, payload_b64, signature_b64 = parts

    header = _decode_json_segment(header_b64)
    if header.get("alg") != _ALGORITHM:
        raise WrongAlgorithm(f"algorithm {header.get('alg')!r} is not accepted")
    if header.get("typ") != _TOKEN_TYPE:
        raise MalformedToken("unexpected token type")

    payload = _decode_json_segment(payload_b64)
    subject = payload.get("sub")
    issuer = payload.get("iss")
    issued_at = payload.get("iat")
    expires_at = payload.get("exp")
    if not isinstance(subject, str) or not subject:
        raise MalformedToken("missing or empty sub claim")
    if not isinstance(issuer, str):
        raise MalformedToken("missing iss claim")
    try:
        role = Role(payload.get("role"))
    except ValueError:
        raise MalformedToken(f"unknown role {payload.get('role')!r}") from None
    for name, value in (("iat", issued_at), ("exp", expires_at)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise MalformedToken(f"{name} claim must be an integer")

    signature = _b64url_decode_strict(signature_b64)
    signing_input = f"{header_b64}.{payload_b64}".encode("ascii")
    try:
        verifying_key.verify(signature, signing_input)
    except (InvalidSignature, ValueError) as exc:
        raise BadSignature("signature does not verify") from exc

    now_s = int(time.time()) if now is None else int(now)
    if issued_at > now_s + IAT_SKEW_SECONDS:
        raise NotYetValid(f"iat {issued_at} is in the future")
    if expires_at <= now_s:
        raise ExpiredToken(f"token expired at {expires_at}")
    return Claims(subject, role, issuer, issued_at, expires_at)


def token_fingerprint(token: str) -> str:
    """SHA-256 of the exact token string bytes, as lowercase hex."""
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


# Key files: 32 raw bytes, base64 on a single line under a one-line comment.

def save_verifying_key(path: Union[str, Path], key: Ed25519PublicKey, issuer_id: str = "") -> None:
    raw = key.public_bytes_raw()
    label = f" issuer={issuer_id}" if issuer_id else ""
    Path(path).write_text(
        f"# ed25519 verifying key{label}\n{base64.b64encode(raw).decode('ascii')}\n"
    )


def load_verifying_key(path: Union[str, Path]) -> Ed25519PublicKey:
    raw = _read_key_material(path)
    return Ed25519PublicKey.from_public_bytes(raw)


def save_keypair(directory: Union[str, Path], keypair: AuthorityKeyPair) -> tuple[Path, Path]:
    """Write ``authority.key`` and ``authority.pub`` under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    private_path = directory / "authority.key"
    public_path = directory / "authority.pub"
    raw = keypair.signing_key.private_bytes_raw()
    private_path.write_text(
        f"# ed25519 signing key issuer={keypair.issuer_id}\n"
        f"{base64.b64encode(raw).decode('ascii')}\n"
    )
    private_path.chmod(0o600)
    save_verifying_key(public_path, keypair.verifying_key, keypair.issuer_id)
    return private_path, public_path


def load_keypair(private_path: Union[str, Path]) -> AuthorityKeyPair:
    text = Path(private_path).read_text()
    issuer_id = "clearbox-dev-authority"
    for line in text.splitlines():
        if line.startswith("#") and "issuer=" in line:
            issuer_id = line.split("issuer=", 1)[1].strip()
    raw = _read_key_material(private_path)
    signing_key = Ed25519PrivateKey.from_private_bytes(raw)
    return AuthorityKeyPair(signing_key, signing_key.public_key(), issuer_id)


def _read_key_material(path: Union[str, Path]) -> bytes:
    lines = [
        line.strip()
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if len(lines) != 1:
        raise ValueError(f"{path}: expected exactly one key line")
    raw = base64.b64decode(lines[0], validate=True)
    if len(raw) != 32:
        raise ValueError(f"{path}: key must be 32 raw bytes")
    return raw
