"""Matrix action key exchange over Z_p.

The platform is the semidirect product of the additive group of n x n
matrices over Z_p with the cyclic semigroup generated by a pair (H1, H2),
acting by ``X -> H1 X H2``.  Each party raises ``(M, (H1, H2))`` to a secret
exponent, sends only the matrix part, and combines it with the peer's.
"""

from .matrix import MatrixZp, mat_det, mat_inv, mat_pow
from .modmath import Residue, SafePrime
from .paramgen import PublicParams, builtin_prime, gen_public_params, validate_params
from .protocol import SharedKey, classic_dh_exchange, finalize, initiate, run_exchange
from .semidirect import SemidirectElement, naive_transcript, sd_mul, sd_pow

__version__ = "0.1.0"

__all__ = [
    "MatrixZp",
    "PublicParams",
    "Residue",
    "SafePrime",
    "SemidirectElement",
    "SharedKey",
    "builtin_prime",
    "classic_dh_exchange",
    "finalize",
    "gen_public_params",
    "initiate",
    "mat_det",
    "mat_inv",
    "mat_pow",
    "naive_transcript",
    "run_exchange",
    "sd_mul",
    "sd_pow",
    "validate_params",
]
