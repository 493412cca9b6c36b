"""Reversible data hiding in the encrypted domain on top of single-bit LWE.

Two schemes are provided: difference expansion on bitplane-encrypted images
(``sbed``) and public-key recoding on encryption redundancy (``pkr``).
"""
from .errors import (
    DimensionMismatch,
    ExtractionError,
    FormatError,
    IntegrityError,
    ParameterError,
    PkrdhError,
    PreconditionError,
    RetryLimitExceeded,
    SecurityWarning,
)
from .lwe import (
    Ciphertext,
    LweParams,
    PublicKey,
    SecretKey,
    decrypt,
    default_params,
    encrypt,
    encrypt_bounded,
    keygen,
    pk_gen,
    quantize,
    sk_gen,
    toy_params,
)
from .pkr import (
    PublicEmbeddingKey,
    alpha_bounds,
    error_bound,
    pek_gen,
    pkr_decrypt,
    pkr_embed,
    pkr_encrypt,
    pkr_extract,
    q_step,
)
from .sbed import EncryptedImage, embed_image, encrypt_image, extract_ciphertexts, recover_image, user_decode

__version__ = "0.1.0"
