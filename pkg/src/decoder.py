"""
Min-sum message passing on the Tanner graph of a parity-check matrix.

Messages are fixed-point integers scaled by 2^8 and clamped to +/-64 LLR units, so
decoding is bit-identical on every platform.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional, Tuple

import numpy as np

from src.bitvector import BitVector, BitsLike, as_bitvector
from src.errors import DimensionError, ParameterError
from src.hashvector import hash_vector
from src.ldpc import ParityCheckMatrix, generate_pcm
from src.schemas import DIGEST_SIZE, DecoderConfig, LdpcParams

logger = logging.getLogger(__name__)

SCALE = 1 << 8
CLAMP = 64 * SCALE


@dataclass(frozen=True)
class DecodeOutcome:
    codeword: BitVector
    converged: bool
    iterations_used: int


def channel_llr(crossover: float) -> int:
    """ln((1-eps)/eps) in fixed point; never below one unit."""
    return max(1, int(round(math.log((1.0 - crossover) / crossover) * SCALE)))


def _accepted(index: np.ndarray, bits: np.ndarray, window: Optional[Tuple[int, int]]) -> bool:
    if np.any(bits[index].sum(axis=1) & 1):
        return False
    if window is not None:
        weight = int(bits.sum())
        return window[0] <= weight <= window[1]
    return True


def decode(H: ParityCheckMatrix, r: BitsLike, cfg: Optional[DecoderConfig] = None) -> DecodeOutcome:
    cfg = cfg or DecoderConfig()
    r = as_bitvector(r)
    if len(r) != H.n:
        raise DimensionError(f"hash vector length {len(r)} does not match n={H.n}")
    if cfg.weight_window is not None and cfg.weight_window[1] > H.n:
        raise ParameterError(f"weight window {cfg.weight_window} exceeds n={H.n}")

    index = H.index
    window = cfg.weight_window
    if _accepted(index, r.bits, window):
        return DecodeOutcome(codeword=r, converged=True, iterations_used=0)

    magnitude = channel_llr(cfg.crossover)
    llr = np.where(r.bits == 1, -magnitude, magnitude).astype(np.int64)
    to_check = llr[index]
    rows = np.arange(H.m)
    hard = r.bits

    for iteration in range(1, cfg.max_iterations + 1):
        # check nodes: sign product and min magnitude over the other edges
        negative = to_check < 0
        sign = np.where(negative, -1, 1)
        other_sign = sign * np.where(negative.sum(axis=1, keepdims=True) & 1, -1, 1)
        mag = np.abs(to_check)
        smallest = np.partition(mag, 1, axis=1)
        first = np.argmin(mag, axis=1)
        other_mag = np.repeat(smallest[:, :1], index.shape[1], axis=1)
        other_mag[rows, first] = smallest[:, 1]
        to_var = np.clip(other_sign * other_mag, -CLAMP, CLAMP)

        # variable nodes
        posterior = llr.copy()
        np.add.at(posterior, index, to_var)
        hard = (posterior < 0).astype(np.uint8)
        if _accepted(index, hard, window):
            return DecodeOutcome(codeword=BitVector(hard), converged=True, iterations_used=iteration)
        to_check = np.clip(posterior[index] - to_var, -CLAMP, CLAMP)

    return DecodeOutcome(codeword=BitVector(hard), converged=False, iterations_used=cfg.max_iterations)


def trial_inputs(rng_seed: int, trial_index: int) -> Tuple[bytes, int]:
    """(seed, nonce) of one Monte-Carlo trial; depends only on its arguments."""
    rng = np.random.default_rng([rng_seed, trial_index])
    seed = rng.bytes(DIGEST_SIZE)
    nonce = int.from_bytes(rng.bytes(8), "big")
    return seed, nonce


def _run_trials(params: LdpcParams, cfg: DecoderConfig, rng_seed: int, indices: range) -> int:
    successes = 0
    for trial_index in indices:
        seed, nonce = trial_inputs(rng_seed, trial_index)
        H = generate_pcm(seed, params)
        r = hash_vector(seed, nonce, params.n)
        successes += decode(H, r, cfg).converged
    return successes


def estimate_success_probability(
    params: LdpcParams,
    cfg: DecoderConfig,
    trials: int,
    rng_seed: int,
    workers: int = 1,
) -> float:
    """
    Fraction of random (seed, nonce) puzzles that decode.

    Each trial derives its inputs from (rng_seed, trial index), so the estimate is the
    same for any number of workers.
    """
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    if workers <= 1:
        successes = _run_trials(params, cfg, rng_seed, range(trials))
    else:
        step = -(-trials // workers)
        chunks = [range(start, min(start + step, trials)) for start in range(0, trials, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            successes = sum(pool.map(partial(_run_trials, params, cfg, rng_seed), chunks))
    estimate = successes / trials
    logger.debug("n=%d wc=%d wr=%d: %d/%d decoded", params.n, params.wc, params.wr, successes, trials)
    return estimate
