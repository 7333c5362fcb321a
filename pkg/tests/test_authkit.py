"""Token issuance and verification, including hostile inputs."""

from __future__ import annotations

import base64
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clearbox import authkit
from clearbox.authkit import (
    BadSignature,
    ExpiredToken,
    MalformedToken,
    NotYetValid,
    Role,
    TokenError,
    WrongAlgorithm,
    issue_token,
    keygen,
    load_keypair,
    load_verifying_key,
    save_keypair,
    save_verifying_key,
    token_fingerprint,
    verify_token,
)

from tests.conftest import load_golden
from tests.sha256_reference import sha256_hex

NOW = 1_700_000_000


def b64url(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode()


class TestKeygen:
    def test_distinct_keys(self):
        a, b = keygen(), keygen()
        assert a.signing_key.private_bytes_raw() != b.signing_key.private_bytes_raw()

    def test_sign_verify_roundtrip(self):
        pair = keygen()
        signature = pair.signing_key.sign(b"message")
        pair.verifying_key.verify(signature, b"message")  # raises on failure

    def test_wrong_key_rejects(self):
        a, b = keygen(), keygen()
        signature = a.signing_key.sign(b"message")
        with pytest.raises(Exception):
            b.verifying_key.verify(signature, b"message")


class TestIssueAndVerify:
    def test_owner_roundtrip(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW)
        claims = verify_token(authority.verifying_key, token, now=NOW + 10)
        assert claims.subject == "alice"
        assert claims.role is Role.OWNER
        assert claims.issued_at == NOW and claims.expires_at == NOW + 3600
        assert claims.issuer == authority.issuer_id

    def test_expired(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW)
        with pytest.raises(ExpiredToken):
            verify_token(authority.verifying_key, token, now=NOW + 3601)

    def test_consumer_role_preserved(self, authority):
        token = issue_token(authority, "bob", "consumer", 3600, now=NOW)
        claims = verify_token(authority.verifying_key, token, now=NOW)
        assert claims.role is Role.CONSUMER and claims.role is not Role.OWNER

    def test_not_yet_valid_beyond_skew(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW + 120)
        with pytest.raises(NotYetValid):
            verify_token(authority.verifying_key, token, now=NOW)

    def test_iat_within_skew_accepted(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW + 59)
        assert verify_token(authority.verifying_key, token, now=NOW).subject == "alice"

    def test_empty_subject_rejected(self, authority):
        with pytest.raises(ValueError):
            issue_token(authority, "", Role.OWNER, 3600, now=NOW)

    def test_nonpositive_ttl_rejected(self, authority):
        with pytest.raises(ValueError):
            issue_token(authority, "alice", Role.OWNER, 0, now=NOW)

    @given(
        subject=st.text(min_size=1, max_size=30),
        role=st.sampled_from(list(Role)),
        ttl=st.integers(min_value=1, max_value=10**7),
    )
    @settings(max_examples=80, deadline=None)
    def test_roundtrip_property(self, authority, subject, role, ttl):
        token = issue_token(authority, subject, role, ttl, now=NOW)
        claims = verify_token(authority.verifying_key, token, now=NOW)
        assert (claims.subject, claims.role) == (subject, role)
        with pytest.raises(ExpiredToken):
            verify_token(authority.verifying_key, token, now=NOW + ttl)


class TestRejection:
    def test_payload_character_mutation_is_bad_signature(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW)
        header, payload, signature = token.split(".")
        target = 5
        mutated_char = "A" if payload[target] != "A" else "B"
        mutated = ".".join((header, payload[:target] + mutated_char + payload[target + 1 :], signature))
        with pytest.raises((BadSignature, MalformedToken)):
            verify_token(authority.verifying_key, mutated, now=NOW)

    def test_alg_none_rejected(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW)
        _, payload, signature = token.split(".")
        forged_header = b64url(json.dumps({"alg": "none", "typ": "JWT"}).encode())
        with pytest.raises(WrongAlgorithm):
            verify_token(authority.verifying_key, f"{forged_header}.{payload}.{signature}", now=NOW)
        with pytest.raises(WrongAlgorithm):
            verify_token(authority.verifying_key, f"{forged_header}.{payload}.", now=NOW)

    def test_hs256_header_rejected(self, authority):
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW)
        _, payload, signature = token.split(".")
        forged_header = b64url(json.dumps({"alg": "HS256", "typ": "JWT"}).encode())
        with pytest.raises(WrongAlgorithm):
            verify_token(authority.verifying_key, f"{forged_header}.{payload}.{signature}", now=NOW)

    def test_wrong_key_never_verifies(self, authority):
        other = keygen("other-authority")
        token = issue_token(other, "alice", Role.OWNER, 3600, now=NOW)
        with pytest.raises(BadSignature):
            verify_token(authority.verifying_key, token, now=NOW)

    @pytest.mark.parametrize(
        "broken",
        [
            "",
            "only-one-part",
            "two.parts",
            "a.b.c.d",
            "!!!.###.$$$",
            "e30.e30",
        ],
    )
    def test_malformed_structures(self, authority, broken):
        with pytest.raises(MalformedToken):
            verify_token(authority.verifying_key, broken, now=NOW)

    def test_non_object_payload_rejected(self, authority):
        header = b64url(json.dumps({"alg": "EdDSA", "typ": "JWT"}).encode())
        payload = b64url(json.dumps([1, 2, 3]).encode())
        with pytest.raises(MalformedToken):
            verify_token(authority.verifying_key, f"{header}.{payload}.AAAA", now=NOW)

    def test_unknown_role_rejected(self, authority):
        header = b64url(json.dumps({"alg": "EdDSA", "typ": "JWT"}).encode())
        payload = b64url(
            json.dumps(
                {"sub": "alice", "role": "root", "iss": "x", "iat": NOW, "exp": NOW + 10}
            ).encode()
        )
        with pytest.raises(MalformedToken):
            verify_token(authority.verifying_key, f"{header}.{payload}.AAAA", now=NOW)

    def test_noncanonical_base64_rejected(self, authority):
        # a lenient decoder maps e.g. 'QR' and 'QQ' to the same byte; every
        # distinct token string must either verify as itself or be refused
        token = issue_token(authority, "alice", Role.OWNER, 3600, now=NOW)
        header, payload, signature = token.split(".")
        trailing = signature[-1]
        alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
        for replacement in alphabet:
            if replacement == trailing:
                continue
            candidate = f"{header}.{payload}.{signature[:-1]}{replacement}"
            with pytest.raises(TokenError):
                verify_token(authority.verifying_key, candidate, now=NOW)

    def test_random_single_byte_mutations_rejected(self, authority):
        rng = random.Random(1234)
        token = issue_token(authority, "alice", Role.CONSUMER, 3600, now=NOW)
        raw = token.encode()
        accepted = 0
        for _ in range(300):
            position = rng.randrange(len(raw))
            replacement = rng.randrange(32, 127)
            while replacement == raw[position]:
                replacement = rng.randrange(32, 127)
            mutated = raw[:position] + bytes([replacement]) + raw[position + 1 :]
            try:
                verify_token(authority.verifying_key, mutated.decode(), now=NOW)
                accepted += 1
            except TokenError:
                pass
        assert accepted == 0


class TestFingerprint:
    def test_stable(self):
        assert token_fingerprint("abc") == token_fingerprint("abc")

    def test_distinguishes(self):
        assert token_fingerprint("abc") != token_fingerprint("abd")

    def test_golden_fixture(self):
        golden = load_golden()
        text = golden["token_fingerprint_input"]
        expected = golden["event"]["token_fingerprint"]
        assert token_fingerprint(text) == expected
        assert sha256_hex(text.encode()) == expected  # independent oracle agrees


class TestKeyFiles:
    def test_public_key_file_shape(self, tmp_path, authority):
        path = tmp_path / "authority.pub"
        save_verifying_key(path, authority.verifying_key, authority.issuer_id)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("#")
        raw = base64.b64decode(lines[1], validate=True)
        assert len(raw) == 32

    def test_public_key_roundtrip(self, tmp_path, authority):
        path = tmp_path / "authority.pub"
        save_verifying_key(path, authority.verifying_key)
        loaded = load_verifying_key(path)
        token = issue_token(authority, "alice", Role.OWNER, 60, now=NOW)
        assert verify_token(loaded, token, now=NOW).subject == "alice"

    def test_keypair_roundtrip(self, tmp_path):
        pair = keygen("round-trip-issuer")
        save_keypair(tmp_path, pair)
        loaded = load_keypair(tmp_path / "authority.key")
        assert loaded.issuer_id == "round-trip-issuer"
        token = issue_token(loaded, "bob", Role.CONSUMER, 60, now=NOW)
        assert verify_token(pair.verifying_key, token, now=NOW).subject == "bob"

    def test_rejects_short_key_material(self, tmp_path):
        path = tmp_path / "bad.pub"
        path.write_text("# comment\n" + base64.b64encode(b"short").decode() + "\n")
        with pytest.raises(ValueError):
            load_verifying_key(path)
