"""
Block headers, sealing and seal verification, and per-block difficulty control.
"""

import logging
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Union

from src.bitvector import BitVector
from src.decoder import decode, estimate_success_probability
from src.errors import ParameterError
from src.hashvector import hash_vector, keccak256
from src.ldpc import generate_pcm, is_codeword, make_params
from src.schemas import NONCE_MAX, BlockHeader, DecoderConfig, DifficultyLevel, DifficultyTable, LdpcParams

logger = logging.getLogger(__name__)

FAST_BLOCK_MS = 9_000
SLOW_BLOCK_MS = 18_000

DEFAULT_CODE_LENGTHS = (16, 20, 24, 28, 32, 36)
DEFAULT_COLUMN_WEIGHT = 3

_UNSEALED = struct.Struct(">32sQQI")
_SEAL = struct.Struct(">Q32s")


def encode_header(header: BlockHeader) -> bytes:
    """parent_hash | number | timestamp_ms | difficulty_level, big-endian."""
    return _UNSEALED.pack(header.parent_hash, header.number, header.timestamp_ms, header.difficulty_level)


def encode_sealed(header: BlockHeader) -> bytes:
    return encode_header(header) + _SEAL.pack(header.nonce, header.codeword_digest)


def decode_sealed(data: bytes) -> BlockHeader:
    if len(data) != _UNSEALED.size + _SEAL.size:
        raise ParameterError(f"sealed header must be {_UNSEALED.size + _SEAL.size} bytes, got {len(data)}")
    parent, number, timestamp, level = _UNSEALED.unpack_from(data)
    nonce, digest = _SEAL.unpack_from(data, _UNSEALED.size)
    return BlockHeader(
        parent_hash=parent,
        number=number,
        timestamp_ms=timestamp,
        difficulty_level=level,
        nonce=nonce,
        codeword_digest=digest,
    )


def seal_hash(header: BlockHeader) -> bytes:
    """Digest of the header without nonce and codeword digest."""
    return keccak256(encode_header(header))


def block_hash(header: BlockHeader) -> bytes:
    return keccak256(encode_sealed(header))


def codeword_digest(codeword: BitVector) -> bytes:
    return keccak256(codeword.packed())


def child_template(parent: BlockHeader, timestamp_ms: int, difficulty_level: int) -> BlockHeader:
    if timestamp_ms < parent.timestamp_ms:
        raise ParameterError("child timestamp precedes its parent")
    return BlockHeader(
        parent_hash=block_hash(parent),
        number=parent.number + 1,
        timestamp_ms=timestamp_ms,
        difficulty_level=difficulty_level,
    )


def attempts_used(sealed: BlockHeader, nonce_start: int) -> int:
    return ((sealed.nonce - nonce_start) & NONCE_MAX) + 1


def _scan(template, level, seal, H, nonce_start, offsets, stop: Optional[threading.Event]):
    n = level.params.n
    for offset in offsets:
        if stop is not None and stop.is_set():
            return None
        nonce = (nonce_start + offset) & NONCE_MAX
        outcome = decode(H, hash_vector(seal, nonce, n), level.decoder)
        if outcome.converged:
            return template.model_copy(
                update={"nonce": nonce, "codeword_digest": codeword_digest(outcome.codeword)}
            )
    return None


def mine(
    template: BlockHeader,
    level: DifficultyLevel,
    nonce_start: int = 0,
    attempt_budget: int = 2**32,
    workers: int = 1,
) -> Optional[BlockHeader]:
    """
    Scan nonces from nonce_start until the decoder converges or the budget runs out.

    With one worker the winner is the first converging nonce in scan order. With
    several workers the nonces are interleaved across threads and the first thread to
    converge wins; the winning nonce may then differ between runs.
    """
    if attempt_budget <= 0:
        return None
    H = generate_pcm(template.parent_hash, level.params)
    seal = seal_hash(template)
    if workers <= 1:
        return _scan(template, level, seal, H, nonce_start, range(attempt_budget), None)

    stop = threading.Event()
    lock = threading.Lock()
    winner: List[BlockHeader] = []

    def work(worker: int) -> None:
        found = _scan(template, level, seal, H, nonce_start, range(worker, attempt_budget, workers), stop)
        if found is not None:
            with lock:
                if not winner:
                    winner.append(found)
                    stop.set()

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, range(workers)))
    return winner[0] if winner else None


def verify_seal(header: BlockHeader, level: DifficultyLevel) -> bool:
    try:
        H = generate_pcm(header.parent_hash, level.params)
        r = hash_vector(seal_hash(header), header.nonce, level.params.n)
        outcome = decode(H, r, level.decoder)
    except ParameterError as e:
        logger.debug("Seal check failed: %s", e)
        return False
    return (
        outcome.converged
        and is_codeword(H, outcome.codeword)
        and codeword_digest(outcome.codeword) == header.codeword_digest
    )


def adjust_difficulty(
    parent_level_index: int,
    parent_bgt_ms: float,
    table: Union[DifficultyTable, Sequence, int],
) -> int:
    """
    Step one level harder when the parent came in under 9 s, one easier above 18 s.
    """
    size = table if isinstance(table, int) else len(table)
    if not 0 <= parent_level_index < size:
        raise ParameterError(f"level {parent_level_index} outside table of {size} levels")
    if parent_bgt_ms < FAST_BLOCK_MS:
        index = parent_level_index + 1
    elif parent_bgt_ms > SLOW_BLOCK_MS:
        index = parent_level_index - 1
    else:
        index = parent_level_index
    return min(max(index, 0), size - 1)


def expected_attempts(level: DifficultyLevel) -> float:
    return 1.0 / level.success_prob


def expected_block_time(level: DifficultyLevel, hashrate: float) -> float:
    """Seconds to a block at `hashrate` attempts per second."""
    if hashrate <= 0:
        raise ParameterError(f"hashrate must be positive, got {hashrate}")
    return expected_attempts(level) / hashrate


def default_level_params(n: int, wc: int = DEFAULT_COLUMN_WEIGHT) -> LdpcParams:
    """wr = 4 when 4 divides n, else the smallest divisor of n above wc."""
    if n % 4 == 0 and 4 > wc:
        wr = 4
    else:
        wr = next((d for d in range(wc + 1, n + 1) if n % d == 0), None)
        if wr is None:
            raise ParameterError(f"no row weight above wc={wc} divides n={n}")
    return make_params(n, wc, wr)


def build_default_table(
    trials: int,
    rng_seed: int = 0,
    code_lengths: Sequence[int] = DEFAULT_CODE_LENGTHS,
    decoder: Optional[DecoderConfig] = None,
    workers: int = 1,
) -> DifficultyTable:
    """
    Estimate success probabilities for the default levels.

    Levels whose estimate is zero or does not fall below the previous level are left
    out, since the table must be strictly monotone.
    """
    decoder = decoder or DecoderConfig()
    levels: List[DifficultyLevel] = []
    for n in code_lengths:
        params = default_level_params(n)
        p = estimate_success_probability(params, decoder, trials, rng_seed, workers=workers)
        logger.info("Level n=%d wc=%d wr=%d: success probability %.6f", n, params.wc, params.wr, p)
        if p <= 0.0 or (levels and p >= levels[-1].success_prob):
            logger.warning("Skipping n=%d: estimate %.6f keeps the table from being monotone", n, p)
            continue
        levels.append(DifficultyLevel(params=params, decoder=decoder, success_prob=p))
    if not levels:
        raise ParameterError("no level produced a usable success probability; raise the trial count")
    return DifficultyTable(levels=levels)
