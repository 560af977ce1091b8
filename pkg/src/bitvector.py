from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np


@dataclass(frozen=True, eq=False)
class BitVector:
    """
    Fixed-length binary vector (hash vectors r and candidate codewords c).

    Bits are held one per uint8 in a read-only array; index 0 is the first bit.
    """

    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.uint8, copy=True).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ValueError("bit vectors hold only 0 and 1")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(np.zeros(length, dtype=np.uint8))

    @classmethod
    def unit(cls, length: int, index: int) -> "BitVector":
        arr = np.zeros(length, dtype=np.uint8)
        arr[index] = 1
        return cls(arr)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        return cls(np.fromiter(bits, dtype=np.uint8))

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitVector":
        """Unpack MSB-first bytes and keep the first `length` bits."""
        unpacked = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if unpacked.size < length:
            raise ValueError(f"{len(data)} bytes cannot supply {length} bits")
        return cls(unpacked[:length])

    def __len__(self) -> int:
        return int(self.bits.size)

    def __getitem__(self, index: int) -> int:
        if not 0 <= index < self.bits.size:
            raise IndexError(f"bit index {index} outside 0..{self.bits.size - 1}")
        return int(self.bits[index])

    def __iter__(self):
        return (int(bit) for bit in self.bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((len(self), self.bits.tobytes()))

    def __xor__(self, other: "BitVector") -> "BitVector":
        if len(self) != len(other):
            raise ValueError("xor of bit vectors with different lengths")
        return BitVector(self.bits ^ other.bits)

    def flip(self, index: int) -> "BitVector":
        return self ^ BitVector.unit(len(self), index)

    def weight(self) -> int:
        return int(self.bits.sum())

    def any(self) -> bool:
        return bool(self.bits.any())

    def packed(self) -> bytes:
        """MSB-first packing into ceil(len/8) bytes, zero-padded at the tail."""
        return np.packbits(self.bits).tobytes()

    def to_string(self) -> str:
        return "".join("1" if bit else "0" for bit in self.bits)

    def __repr__(self) -> str:
        return f"BitVector({self.to_string()!r})"


BitsLike = Union[BitVector, Iterable[int]]


def as_bitvector(value: BitsLike) -> BitVector:
    if isinstance(value, BitVector):
        return value
    return BitVector.from_bits(value)
