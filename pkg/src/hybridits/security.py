"""TPM-like secure platform with one API for every plane.

Private keys never leave a :class:`SecurePlatform`; callers hold opaque
:class:`KeyHandle` values and get public keys, signatures and plaintexts
back. Primitives:

* signatures: Ed25519 (``Signing`` and ``LongTermIdentity`` keys)
* encryption: X25519 ephemeral-static key agreement, HKDF-SHA256,
  ChaCha20-Poly1305 (``Encryption`` keys)

In deterministic mode all key material, ephemeral keys and nonces come from
a generator seeded per platform, so a fixed seed reproduces every public key
and ciphertext byte for byte. With ``seed=None`` the platform draws from
``os.urandom``.
"""

from __future__ import annotations

import hashlib
import os
import random
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import AuthFailure, UnknownHandle, WrongPurpose

ED25519 = "ed25519"
X25519 = "x25519"

_RAW = dict(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)
_TAG_LEN = 16
_NONCE_LEN = 12
_KDF_INFO = b"hybridits/ecies/v1"


class KeyPurpose(Enum):
    SIGNING = "signing"
    ENCRYPTION = "encryption"
    LONG_TERM_IDENTITY = "long-term-identity"


_SIGNING_PURPOSES = (KeyPurpose.SIGNING, KeyPurpose.LONG_TERM_IDENTITY)


@dataclass(frozen=True)
class KeyHandle:
    platform_id: str
    index: int
    purpose: KeyPurpose


@dataclass(frozen=True)
class PublicKey:
    algorithm: str
    raw: bytes

    def to_bytes(self) -> bytes:
        return self.algorithm.encode() + b":" + self.raw

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicKey":
        algorithm, _, raw = data.partition(b":")
        return cls(algorithm.decode(), raw)

    def hex(self) -> str:
        return f"{self.algorithm}:{self.raw.hex()}"

    @classmethod
    def from_hex(cls, text: str) -> "PublicKey":
        algorithm, _, raw = text.partition(":")
        return cls(algorithm, bytes.fromhex(raw))

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]


@dataclass(frozen=True)
class SignedBlob:
    signature: bytes
    signer: PublicKey


@dataclass(frozen=True)
class CipherBlob:
    ephemeral: bytes
    nonce: bytes
    ciphertext: bytes
    tag: bytes
    recipient: PublicKey

    def to_bytes(self) -> bytes:
        parts = (self.recipient.to_bytes(), self.ephemeral, self.nonce, self.ciphertext, self.tag)
        return b"".join(struct.pack(">I", len(p)) + p for p in parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CipherBlob":
        parts = []
        offset = 0
        try:
            for _ in range(5):
                (n,) = struct.unpack_from(">I", data, offset)
                offset += 4
                if offset + n > len(data):
                    raise AuthFailure("truncated cipher blob")
                parts.append(data[offset : offset + n])
                offset += n
        except struct.error as exc:
            raise AuthFailure("malformed cipher blob") from exc
        if offset != len(data):
            raise AuthFailure("trailing bytes after cipher blob")
        recipient, ephemeral, nonce, ciphertext, tag = parts
        try:
            key = PublicKey.from_bytes(recipient)
        except UnicodeDecodeError as exc:
            raise AuthFailure("malformed recipient key") from exc
        return cls(ephemeral, nonce, ciphertext, tag, key)


def _seeded_entropy(seed: int | str | bytes) -> Callable[[int], bytes]:
    if not isinstance(seed, int):
        raw = seed.encode() if isinstance(seed, str) else seed
        seed = int.from_bytes(hashlib.sha256(raw).digest(), "big")
    rng = random.Random(seed)
    return rng.randbytes


def derive_seed(root_seed: int, label: str) -> int:
    """Independent per-component seed from a scenario seed and a label."""
    digest = hashlib.sha256(f"{root_seed}/{label}".encode()).digest()
    return int.from_bytes(digest, "big")


def _session_key(shared: bytes, ephemeral: bytes, recipient: bytes) -> bytes:
    hkdf = HKDF(algorithm=hashes.SHA256(), length=32, salt=ephemeral + recipient, info=_KDF_INFO)
    return hkdf.derive(shared)


class SecurePlatform:
    """Key store plus crypto operations; one instance per node.

    The public operations are exactly those listed in ``OPERATIONS``. None of
    them returns private key material.
    """

    OPERATIONS = ("generate_key", "public_key", "sign", "decrypt", "encrypt_for", "random_bytes", "handle_for")

    def __init__(self, platform_id: str, seed: int | str | bytes | None = None):
        self._platform_id = platform_id
        self._entropy = os.urandom if seed is None else _seeded_entropy(seed)
        self.__keys: dict[int, tuple[KeyPurpose, object]] = {}
        self.__public: dict[int, PublicKey] = {}

    @property
    def platform_id(self) -> str:
        return self._platform_id

    def generate_key(self, purpose: KeyPurpose) -> KeyHandle:
        material = self._entropy(32)
        if purpose is KeyPurpose.ENCRYPTION:
            private = X25519PrivateKey.from_private_bytes(material)
            public = PublicKey(X25519, private.public_key().public_bytes(**_RAW))
        else:
            private = Ed25519PrivateKey.from_private_bytes(material)
            public = PublicKey(ED25519, private.public_key().public_bytes(**_RAW))
        index = len(self.__keys)
        self.__keys[index] = (purpose, private)
        self.__public[index] = public
        return KeyHandle(self._platform_id, index, purpose)

    def _lookup(self, handle: KeyHandle) -> tuple[KeyPurpose, object]:
        if handle.platform_id != self._platform_id or handle.index not in self.__keys:
            raise UnknownHandle(f"handle {handle.index} not issued by platform {self._platform_id}")
        return self.__keys[handle.index]

    def public_key(self, handle: KeyHandle) -> PublicKey:
        self._lookup(handle)
        return self.__public[handle.index]

    def handle_for(self, public_key: PublicKey) -> KeyHandle | None:
        """Handle of the key pair owning ``public_key``, if it lives here."""
        for index, candidate in self.__public.items():
            if candidate == public_key:
                return KeyHandle(self._platform_id, index, self.__keys[index][0])
        return None

    def sign(self, handle: KeyHandle, data: bytes) -> SignedBlob:
        purpose, private = self._lookup(handle)
        if purpose not in _SIGNING_PURPOSES:
            raise WrongPurpose(f"{purpose.value} key cannot sign")
        return SignedBlob(private.sign(bytes(data)), self.__public[handle.index])

    def decrypt(self, handle: KeyHandle, blob: CipherBlob) -> bytes:
        purpose, private = self._lookup(handle)
        if purpose is not KeyPurpose.ENCRYPTION:
            raise WrongPurpose(f"{purpose.value} key cannot decrypt")
        own = self.__public[handle.index]
        if blob.recipient != own:
            raise AuthFailure("cipher blob addressed to another key")
        try:
            shared = private.exchange(X25519PublicKey.from_public_bytes(blob.ephemeral))
            key = _session_key(shared, blob.ephemeral, own.raw)
            return ChaCha20Poly1305(key).decrypt(blob.nonce, blob.ciphertext + blob.tag, own.raw)
        except (InvalidTag, ValueError) as exc:
            raise AuthFailure("authentication tag mismatch") from exc

    def encrypt_for(self, recipient: PublicKey, data: bytes) -> CipherBlob:
        """Encrypt to ``recipient`` drawing ephemeral randomness from this platform."""
        return encrypt(recipient, data, entropy=self._entropy)

    def random_bytes(self, n: int) -> bytes:
        return self._entropy(n)


def verify(public_key: PublicKey, data: bytes, blob: SignedBlob) -> bool:
    if blob.signer != public_key or public_key.algorithm != ED25519:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key.raw).verify(blob.signature, bytes(data))
    except (InvalidSignature, ValueError):
        return False
    return True


def encrypt(recipient: PublicKey, data: bytes, *, entropy: Callable[[int], bytes] | None = None) -> CipherBlob:
    if recipient.algorithm != X25519:
        raise WrongPurpose("recipient key is not an encryption key")
    entropy = entropy or os.urandom
    ephemeral = X25519PrivateKey.from_private_bytes(entropy(32))
    ephemeral_raw = ephemeral.public_key().public_bytes(**_RAW)
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(recipient.raw))
    key = _session_key(shared, ephemeral_raw, recipient.raw)
    nonce = entropy(_NONCE_LEN)
    sealed = ChaCha20Poly1305(key).encrypt(nonce, bytes(data), recipient.raw)
    return CipherBlob(ephemeral_raw, nonce, sealed[:-_TAG_LEN], sealed[-_TAG_LEN:], recipient)


def decrypt(platform: SecurePlatform, handle: KeyHandle, blob: CipherBlob) -> bytes:
    return platform.decrypt(handle, blob)


def sign(platform: SecurePlatform, handle: KeyHandle, data: bytes) -> SignedBlob:
    return platform.sign(handle, data)


def generate_key(platform: SecurePlatform, purpose: KeyPurpose) -> KeyHandle:
    return platform.generate_key(purpose)
