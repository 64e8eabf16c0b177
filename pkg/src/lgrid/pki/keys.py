"""Keypair generation and sign/verify over the two supported schemes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa

PrivateKey = Union[ec.EllipticCurvePrivateKey, rsa.RSAPrivateKey]
PublicKey = Union[ec.EllipticCurvePublicKey, rsa.RSAPublicKey]

DEFAULT_ALGORITHM = "ec-p256"
SUPPORTED_ALGORITHMS = ("ec-p256", "rsa-2048")


class UnsupportedAlgorithmError(ValueError):
    pass


@dataclass(frozen=True)
class KeyPair:
    private_key: PrivateKey
    algorithm_id: str

    @property
    def public_key(self) -> PublicKey:
        return self.private_key.public_key()

    def sign(self, data: bytes) -> bytes:
        return sign(self.private_key, data)

    def verify(self, signature: bytes, data: bytes) -> bool:
        return verify(self.public_key, signature, data)

    def private_pem(self) -> bytes:
        return self.private_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )

    def public_pem(self) -> bytes:
        return self.public_key.public_bytes(
            serialization.Encoding.PEM,
            serialization.PublicFormat.SubjectPublicKeyInfo,
        )


def generate_keypair(algorithm_id: str = DEFAULT_ALGORITHM) -> KeyPair:
    if algorithm_id == "ec-p256":
        key: PrivateKey = ec.generate_private_key(ec.SECP256R1())
    elif algorithm_id == "rsa-2048":
        key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    else:
        raise UnsupportedAlgorithmError(f"unsupported algorithm: {algorithm_id!r}")
    return KeyPair(private_key=key, algorithm_id=algorithm_id)


def sign(key: PrivateKey, data: bytes) -> bytes:
    if isinstance(key, ec.EllipticCurvePrivateKey):
        return key.sign(data, ec.ECDSA(hashes.SHA256()))
    return key.sign(data, padding.PKCS1v15(), hashes.SHA256())


def verify(key: PublicKey, signature: bytes, data: bytes) -> bool:
    try:
        if isinstance(key, ec.EllipticCurvePublicKey):
            key.verify(signature, data, ec.ECDSA(hashes.SHA256()))
        else:
            key.verify(signature, data, padding.PKCS1v15(), hashes.SHA256())
        return True
    except InvalidSignature:
        return False


def same_public_key(a: PublicKey, b: PublicKey) -> bool:
    return a.public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    ) == b.public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    )


def load_private_key_pem(pem: bytes) -> PrivateKey:
    key = serialization.load_pem_private_key(pem, password=None)
    if not isinstance(key, (ec.EllipticCurvePrivateKey, rsa.RSAPrivateKey)):
        raise UnsupportedAlgorithmError(f"unsupported key type: {type(key).__name__}")
    return key
