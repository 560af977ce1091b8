"""
GF(2) core of the puzzle: the sparse parity-check matrix, its seeded Gallager
construction, syndrome computation and codeword validation.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from pydantic import ValidationError

from src.bitvector import BitVector, BitsLike, as_bitvector
from src.errors import DimensionError, ParameterError
from src.hashvector import SeededStream
from src.schemas import DIGEST_SIZE, LdpcParams

__all__ = [
    "BitVector",
    "ParityCheckMatrix",
    "generate_pcm",
    "syndrome",
    "is_codeword",
    "parse_dump",
    "make_params",
]

Row = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """
    Sparse binary m x n matrix stored as one sorted column-index tuple per row.

    Rows come in wc bands of n/wr rows; band 0 is the canonical base band and every
    later band is a column permutation of it.
    """

    params: LdpcParams
    rows: Tuple[Row, ...]
    index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        params = self.params
        if len(self.rows) != params.m:
            raise ParameterError(f"expected {params.m} rows, got {len(self.rows)}")
        index = np.array(self.rows, dtype=np.intp).reshape(params.m, -1)
        if index.shape[1] != params.wr:
            raise ParameterError(f"every row must hold exactly wr={params.wr} entries")
        if index.size and (index.min() < 0 or index.max() >= params.n):
            raise ParameterError("column index out of range")
        if np.any(np.diff(index, axis=1) <= 0):
            raise ParameterError("row entries must be strictly ascending")
        weights = np.bincount(index.ravel(), minlength=params.n)
        if np.any(weights != params.wc):
            raise ParameterError(f"every column must appear in exactly wc={params.wc} rows")
        index.setflags(write=False)
        object.__setattr__(self, "index", index)

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def n(self) -> int:
        return self.params.n

    def band(self, b: int) -> Tuple[Row, ...]:
        size = self.params.band_rows
        return self.rows[b * size:(b + 1) * size]

    def column(self, j: int) -> List[int]:
        """Rows holding a one in column j."""
        return [i for i, row in enumerate(self.rows) if j in row]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.m, self.n), dtype=np.uint8)
        np.put_along_axis(dense, self.index, 1, axis=1)
        return dense

    def dump(self) -> str:
        """Debug dump: 'n wc wr m' then one ascending row per line."""
        p = self.params
        lines = [f"{p.n} {p.wc} {p.wr} {p.m}"]
        lines.extend(" ".join(str(j) for j in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.params == other.params and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.params, self.rows))


def make_params(n: int, wc: int, wr: int) -> LdpcParams:
    """LdpcParams with validation failures reported as ParameterError."""
    try:
        return LdpcParams(n=n, wc=wc, wr=wr)
    except ValidationError as e:
        raise ParameterError(e.errors()[0]["msg"]) from e


def parse_dump(text: str) -> ParityCheckMatrix:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ParameterError("empty parity-check matrix dump")
    try:
        n, wc, wr, m = (int(tok) for tok in lines[0].split())
        rows = tuple(tuple(int(tok) for tok in line.split()) for line in lines[1:])
    except ValueError as exc:
        raise ParameterError(f"malformed parity-check matrix dump: {exc}") from exc
    params = make_params(n, wc, wr)
    if params.m != m:
        raise ParameterError(f"header m={m} disagrees with n*wc/wr={params.m}")
    return ParityCheckMatrix(params=params, rows=rows)


def base_band(params: LdpcParams) -> Tuple[Row, ...]:
    wr = params.wr
    return tuple(tuple(range(i * wr, (i + 1) * wr)) for i in range(params.band_rows))


def generate_pcm(seed: bytes, params: LdpcParams) -> ParityCheckMatrix:
    """
    Gallager construction seeded by a 32-byte digest (the parent hash).

    Bands 1..wc-1 each draw one Fisher-Yates permutation of 0..n-1 from a single
    SeededStream, band after band; row r of band b holds perm[k] for every column k
    of base row r.
    """
    if len(seed) != DIGEST_SIZE:
        raise ParameterError(f"seed must be {DIGEST_SIZE} bytes, got {len(seed)}")
    # Re-run validation for params built with model_construct.
    params = make_params(params.n, params.wc, params.wr)
    return _generate_pcm(bytes(seed), params)


@lru_cache(maxsize=512)
def _generate_pcm(seed: bytes, params: LdpcParams) -> ParityCheckMatrix:
    base = base_band(params)
    stream = SeededStream(seed)
    rows: List[Row] = list(base)
    for _ in range(1, params.wc):
        perm = list(range(params.n))
        for i in range(params.n - 1, 0, -1):
            j = stream.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        rows.extend(tuple(sorted(perm[k] for k in row)) for row in base)
    return ParityCheckMatrix(params=params, rows=tuple(rows))


def syndrome(H: ParityCheckMatrix, c: BitsLike) -> BitVector:
    """H*c over GF(2)."""
    c = as_bitvector(c)
    if len(c) != H.n:
        raise DimensionError(f"vector length {len(c)} does not match n={H.n}")
    return BitVector(c.bits[H.index].sum(axis=1) & 1)


def is_codeword(H: ParityCheckMatrix, c: BitsLike) -> bool:
    return not syndrome(H, c).any()
