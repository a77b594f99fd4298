"""Linearly homomorphic signatures from lattices, with exact integer linear
algebra, a discrete Gaussian sampler and executable security games."""

from .sampler import RandomStream
from .scheme import (
    LinearFunc,
    PublicKey,
    PublicParams,
    SecretKey,
    Signature,
    VerifyResult,
    evaluate,
    key_gen,
    setup,
    setup_profile,
    sign,
    verify,
)

__all__ = [
    "LinearFunc", "PublicKey", "PublicParams", "RandomStream", "SecretKey", "Signature",
    "VerifyResult", "evaluate", "key_gen", "setup", "setup_profile", "sign", "verify",
]
