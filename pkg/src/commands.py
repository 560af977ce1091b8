import json
import logging
import os
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import yaml

from src import __version__, deps
from src.consensus import attempts_used, build_default_table, child_template, expected_attempts, mine
from src.errors import ParameterError, UsageError
from src.hashvector import keccak256
from src.ldpc import generate_pcm, make_params
from src.loader import load_samples, load_sim_config
from src.schemas import AdResult, BlockHeader, DifficultyTable, RunManifest
from src.simnet import blocks_frame, run_simulation
from src.stats import (
    HISTOGRAM_BINS,
    ad_two_sample,
    as_array,
    expected_frequencies,
    fit_exponential_mean,
    histogram10,
)

logger = logging.getLogger(__name__)

MIN_ANALYZE_SAMPLES = 10
MINE_ATTEMPT_BUDGET = 2**40
BENCH_COLUMNS = ["height", "attempts", "bgt_ms"]


def _started() -> datetime:
    return datetime.now(timezone.utc)


def _write_manifest(
    out_dir: str, command: str, config: Dict[str, Any], rng_seed: Optional[int], started_at: datetime
) -> RunManifest:
    manifest = RunManifest(
        command=command,
        config=config,
        rng_seed=rng_seed,
        version=__version__,
        started_at=started_at,
        finished_at=_started(),
    )
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.model_dump_json(indent=2))
    return manifest


def _write_json(path: str, payload: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(out_dir: Optional[str]) -> Optional[str]:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    return out_dir


def cmd_mine_bench(
    level_index: int,
    blocks: int,
    threads: int = 1,
    rng_seed: int = 0,
    out_dir: Optional[str] = None,
    table: Optional[DifficultyTable] = None,
) -> pd.DataFrame:
    """
    Mine `blocks` consecutive blocks at a fixed level with the real decoder.

    Header timestamps advance one second per block so the puzzles depend only on the
    seed; bgt_ms is the measured wall time.
    """
    started_at = _started()
    table = table or deps.get_difficulty_table()
    if not 0 <= level_index < len(table):
        raise UsageError(f"--level {level_index} outside table of {len(table)} levels")
    if blocks < 1:
        raise UsageError(f"--blocks must be positive, got {blocks}")
    level = table[level_index]
    rng = np.random.default_rng(rng_seed)
    parent = BlockHeader(
        parent_hash=keccak256(rng_seed.to_bytes(8, "big")),
        number=0,
        timestamp_ms=0,
        difficulty_level=level_index,
    )

    rows: List[Dict[str, int]] = []
    for _ in range(blocks):
        template = child_template(parent, parent.timestamp_ms + 1000, level_index)
        nonce_start = int.from_bytes(rng.bytes(8), "big")
        clock = time.perf_counter()
        sealed = mine(template, level, nonce_start, MINE_ATTEMPT_BUDGET, workers=threads)
        elapsed_ms = int(round((time.perf_counter() - clock) * 1000))
        if sealed is None:
            raise RuntimeError(f"block {template.number} not sealed within {MINE_ATTEMPT_BUDGET} attempts")
        attempts = attempts_used(sealed, nonce_start)
        rows.append({"height": sealed.number, "attempts": attempts, "bgt_ms": elapsed_ms})
        logger.info("Mined block %d after %d attempts (%d ms)", sealed.number, attempts, elapsed_ms)
        parent = sealed

    frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    if _prepare_out(out_dir):
        frame.to_csv(os.path.join(out_dir, "bgt.csv"), index=False)
        total_s = frame["bgt_ms"].sum() / 1000.0
        _write_json(
            os.path.join(out_dir, "summary.json"),
            {
                "blocks": blocks,
                "level": level_index,
                "n": level.params.n,
                "wc": level.params.wc,
                "wr": level.params.wr,
                "success_prob": level.success_prob,
                "expected_attempts": expected_attempts(level),
                "mean_attempts": float(frame["attempts"].mean()),
                "mean_bgt_ms": float(frame["bgt_ms"].mean()),
                "measured_hashrate": float(frame["attempts"].sum() / total_s) if total_s > 0 else None,
            },
        )
        _write_manifest(
            out_dir,
            "mine-bench",
            {"level": level_index, "blocks": blocks, "threads": threads, "level_params": level.model_dump(mode="json")},
            rng_seed,
            started_at,
        )
    return frame


def cmd_simulate(config_path: str, out_dir: Optional[str] = None, rng_seed: Optional[int] = None) -> Dict[str, Any]:
    started_at = _started()
    config = load_sim_config(config_path)
    if rng_seed is not None:
        config = config.model_copy(update={"rng_seed": rng_seed})
    report = run_simulation(config)
    summary = report.summary.model_dump(mode="json")
    if _prepare_out(out_dir):
        blocks_frame(report).to_csv(os.path.join(out_dir, "blocks.csv"), index=False)
        pd.DataFrame(
            [p.model_dump() for p in report.difficulty_series], columns=["height", "timestamp_ms", "level"]
        ).to_csv(os.path.join(out_dir, "difficulty.csv"), index=False)
        if report.summary.propagation is not None:
            buckets = report.summary.propagation.model_dump()
            pd.DataFrame({"bucket": list(buckets), "percent": list(buckets.values())}).to_csv(
                os.path.join(out_dir, "propagation.csv"), index=False
            )
        _write_json(os.path.join(out_dir, "summary.json"), summary)
        _write_manifest(out_dir, "simulate", config.model_dump(mode="json"), config.rng_seed, started_at)
    return summary


def _reference_draws(kind: str, values: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    mean = float(values.mean())
    if kind == "exponential":
        return rng.exponential(mean, size=size)
    if kind == "geometric":
        if mean < 1.0:
            raise ParameterError("geometric reference needs attempt counts of at least 1")
        return rng.geometric(1.0 / mean, size=size).astype(float)
    raise UsageError(f"unknown reference distribution {kind!r}")


def cmd_analyze(
    csv_path: str,
    out_dir: Optional[str] = None,
    column: str = "bgt_ms",
    reference: str = "exponential",
    rng_seed: int = 0,
    bins: int = HISTOGRAM_BINS,
    prefix_step: int = 100,
) -> Dict[str, Any]:
    """
    Histogram with expected exponential frequencies, and a two-sample AD test of the
    samples against equally many draws from the fitted reference distribution.
    """
    started_at = _started()
    samples = load_samples(csv_path, column=column)
    values = as_array(samples)
    if values.size < MIN_ANALYZE_SAMPLES:
        raise ParameterError(f"analysis needs at least {MIN_ANALYZE_SAMPLES} samples, got {values.size}")

    rate = fit_exponential_mean(values)
    histogram = histogram10(values, bins=bins)
    expected = expected_frequencies(rate, histogram.edges, values.size)
    table = pd.DataFrame(
        {
            "interval": [
                f"[{100 * i // bins}, {100 * (i + 1) // bins}{']' if i == bins - 1 else ')'}" for i in range(bins)
            ],
            "lower": histogram.edges[:-1],
            "upper": histogram.edges[1:],
            "observed": histogram.counts,
            "expected": expected,
        }
    )

    rng = np.random.default_rng(rng_seed)
    result = ad_two_sample(values, _reference_draws(reference, values, values.size, rng))

    prefixes = []
    if prefix_step > 0:
        for size in range(prefix_step, values.size + 1, prefix_step):
            head = values[:size]
            prefix_result = ad_two_sample(head, _reference_draws(reference, head, size, rng))
            prefixes.append(
                {
                    "samples": size,
                    "mean": float(head.mean()),
                    "std": float(head.std(ddof=1)),
                    "standardized": prefix_result.standardized,
                    "p_bound": prefix_result.p_bound,
                }
            )

    analysis = {
        "samples": int(values.size),
        "column": column,
        "reference": reference,
        "rate": rate,
        "mean": float(values.mean()),
        "variance": float(values.var(ddof=1)),
        "std": float(values.std(ddof=1)),
        "ad": result.report(),
        "prefixes": prefixes,
    }
    if _prepare_out(out_dir):
        table.to_csv(os.path.join(out_dir, "histogram.csv"), index=False)
        pd.DataFrame(prefixes, columns=["samples", "mean", "std", "standardized", "p_bound"]).to_csv(
            os.path.join(out_dir, "prefixes.csv"), index=False
        )
        _write_json(os.path.join(out_dir, "analysis.json"), analysis)
        _write_manifest(
            out_dir,
            "analyze",
            {"input": csv_path, "column": column, "reference": reference, "bins": bins, "prefix_step": prefix_step},
            rng_seed,
            started_at,
        )
    analysis["histogram"] = table
    return analysis


def cmd_adtest(f_path: str, g_path: str, midrank: bool = True) -> AdResult:
    f = load_samples(f_path)
    g = load_samples(g_path)
    return ad_two_sample(f, g, midrank=midrank)


def parse_seed(seed_hex: str) -> bytes:
    text = seed_hex[2:] if seed_hex.lower().startswith("0x") else seed_hex
    try:
        seed = bytes.fromhex(text)
    except ValueError:
        raise UsageError(f"seed {seed_hex!r} is not valid hex") from None
    if len(seed) != 32:
        raise UsageError(f"seed must be 32 bytes (64 hex digits), got {len(seed)}")
    return seed


def cmd_pcm(seed_hex: str, n: int, wc: int, wr: int) -> str:
    seed = parse_seed(seed_hex)
    return generate_pcm(seed, make_params(n, wc, wr)).dump()


def cmd_build_table(out_path: str, trials: int, rng_seed: int = 0, workers: int = 1) -> DifficultyTable:
    started_at = _started()
    table = build_default_table(trials=trials, rng_seed=rng_seed, workers=workers)
    out_dir = os.path.dirname(out_path) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(table.model_dump(mode="json"), fh, sort_keys=False)
    _write_manifest(out_dir, "build-table", {"out": out_path, "trials": trials}, rng_seed, started_at)
    return table


AD_EXAMPLE_FAMILIES = {
    "exp1-vs-normal": lambda rng, size: (rng.exponential(1.0, size), rng.normal(1.0, 1.0, size)),
    "exp1-vs-exp2": lambda rng, size: (rng.exponential(1.0, size), rng.exponential(2.0, size)),
    "exp1-vs-exp1": lambda rng, size: (rng.exponential(1.0, size), rng.exponential(1.0, size)),
}


def cmd_ad_examples(
    out_dir: Optional[str] = None, rng_seed: int = 0, sizes: Sequence[int] = (10, 20, 30)
) -> pd.DataFrame:
    """Two-sample AD results for known distribution pairs at growing sample sizes."""
    started_at = _started()
    rng = np.random.default_rng(rng_seed)
    rows = []
    for family, draw in AD_EXAMPLE_FAMILIES.items():
        for size in sizes:
            f, g = draw(rng, size)
            result = ad_two_sample(f, g)
            rows.append(
                {"family": family, "samples": size, "standardized": result.standardized, "p_bound": result.p_bound}
            )
    frame = pd.DataFrame(rows, columns=["family", "samples", "standardized", "p_bound"])
    if _prepare_out(out_dir):
        frame.to_csv(os.path.join(out_dir, "ad_examples.csv"), index=False)
        _write_manifest(out_dir, "ad-examples", {"sizes": list(sizes)}, rng_seed, started_at)
    return frame
