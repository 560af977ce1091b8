"""
Keccak-256 primitive, the seeded byte stream used for puzzle generation, and the
length-n hash vector r derived from a sealing nonce.

Everything here is consensus-critical: byte order, bit order and the stream layout
must not change without changing every matrix and seal produced so far.
"""

from eth_utils import keccak as _keccak

from src.bitvector import BitVector
from src.errors import ParameterError
from src.schemas import DIGEST_SIZE, NONCE_MAX

DIGEST_BITS = DIGEST_SIZE * 8
_WORD_SPACE = 2**32


def keccak256(message: bytes) -> bytes:
    """Original Keccak-256 (pre-NIST padding), as used by Ethereum."""
    return _keccak(primitive=bytes(message))


def nonce_bytes(nonce: int) -> bytes:
    if not 0 <= nonce <= NONCE_MAX:
        raise ParameterError(f"nonce {nonce} is outside the 64-bit range")
    return nonce.to_bytes(8, "big")


def hash_vector(seal_input: bytes, nonce: int, n: int) -> BitVector:
    """
    Build r from s_1 = keccak(seal_input || nonce) and s_u = keccak(s_{u-1}).

    The first n bits of s_1 s_2 ... are taken MSB-first; with l = n // 256 and
    j = n - 256*l, digests s_1..s_l contribute fully and s_{l+1} contributes j bits.
    """
    if n < 1:
        raise ParameterError(f"hash vector length must be positive, got {n}")
    if len(seal_input) != DIGEST_SIZE:
        raise ParameterError(f"seal input must be {DIGEST_SIZE} bytes, got {len(seal_input)}")

    digest = keccak256(bytes(seal_input) + nonce_bytes(nonce))
    digests = [digest]
    for _ in range(1, -(-n // DIGEST_BITS)):
        digest = keccak256(digest)
        digests.append(digest)
    return BitVector.from_bytes(b"".join(digests), n)


class SeededStream:
    """
    Expandable byte stream: block_i = keccak256(seed || i as 8-byte big-endian).
    """

    def __init__(self, seed: bytes):
        if len(seed) != DIGEST_SIZE:
            raise ParameterError(f"seed must be {DIGEST_SIZE} bytes, got {len(seed)}")
        self._seed = bytes(seed)
        self._counter = 0
        self._buffer = bytearray()

    def read(self, size: int) -> bytes:
        while len(self._buffer) < size:
            self._buffer += keccak256(self._seed + self._counter.to_bytes(8, "big"))
            self._counter += 1
        chunk = bytes(self._buffer[:size])
        del self._buffer[:size]
        return chunk

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection sampling 4-byte words."""
        if not 0 < bound <= _WORD_SPACE:
            raise ParameterError(f"bound {bound} outside 1..2^32")
        limit = (_WORD_SPACE // bound) * bound
        while True:
            word = int.from_bytes(self.read(4), "big")
            if word < limit:
                return word % bound
