"""
Deterministic event-driven simulation of a sealing network.

Mining is modelled statistically: the attempts a node needs on its current head are
Geometric(p_level), turned into seconds by the node's hashrate; the winning attempt
ends at a uniform point inside its own hash interval, so solve times are continuous and
never coincide. Blocks travel with truncated-normal delays; every node follows the
chain with the highest total hardness (sum of expected attempts) and keeps its current
head on ties.
"""

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np
import pandas as pd

from src import deps
from src.consensus import adjust_difficulty, block_hash, expected_attempts
from src.errors import ConfigError, ParameterError
from src.schemas import (
    BlockHeader,
    BlockRecord,
    DifficultyPoint,
    DifficultyTable,
    PropagationBuckets,
    SimConfig,
    SimReport,
    SimSummary,
)

logger = logging.getLogger(__name__)

GENESIS_HASH = bytes(32)
PROPAGATION_BUCKETS_MS = (1_000, 2_000, 4_000)
REPORT_COLUMNS = ["height", "miner", "bgt_ms", "level", "max_prop_ms", "stale"]


@dataclass(eq=False)
class _Block:
    block_id: int
    height: int
    parent: Optional["_Block"]
    miner: str
    level: int
    time_s: float
    timestamp_ms: int
    hardness: float
    digest: bytes
    arrivals: Dict[str, float] = field(default_factory=dict)

    @property
    def bgt_ms(self) -> int:
        return self.timestamp_ms - (self.parent.timestamp_ms if self.parent else 0)


@dataclass(eq=False)
class _Node:
    id: str
    region: str
    mines: bool
    hashrate: float
    head: _Block
    known: Set[int] = field(default_factory=set)
    orphans: Dict[int, List[_Block]] = field(default_factory=dict)
    token: int = 0


class _Simulation:
    def __init__(self, config: SimConfig, table: DifficultyTable):
        self.config = config
        self.table = table
        self.rng = np.random.default_rng(config.rng_seed)
        self.queue: list = []
        self.seq = itertools.count()
        self.blocks: List[_Block] = []
        self.steps = sorted(config.hashrate_steps, key=lambda step: step.at_height)
        self.genesis = _Block(
            block_id=-1,
            height=0,
            parent=None,
            miner="",
            level=config.difficulty.genesis_level,
            time_s=0.0,
            timestamp_ms=0,
            hardness=0.0,
            digest=GENESIS_HASH,
        )
        self.nodes: Dict[str, _Node] = {
            spec.id: _Node(
                id=spec.id,
                region=spec.region_tag,
                mines=spec.role == "sealnode",
                hashrate=spec.hashrate,
                head=self.genesis,
            )
            for spec in config.nodes
        }
        self.neighbors = self._neighbors()
        self.mining_open = True

    def _neighbors(self) -> Optional[Dict[str, List[str]]]:
        topology = self.config.topology
        if topology == "full-mesh":
            return None
        adjacency: Dict[str, List[str]] = {node_id: [] for node_id in self.nodes}
        for node_id, peers in topology.items():
            for peer in peers:
                if peer != node_id and peer not in adjacency[node_id]:
                    adjacency[node_id].append(peer)
                if node_id != peer and node_id not in adjacency[peer]:
                    adjacency[peer].append(node_id)
        return adjacency

    def push(self, time_s: float, kind: str, *payload) -> None:
        heapq.heappush(self.queue, (time_s, next(self.seq), kind, payload))

    # --- mining -----------------------------------------------------------------

    def next_level(self, parent: _Block) -> int:
        if parent.parent is None:
            return parent.level
        return adjust_difficulty(parent.level, parent.bgt_ms, len(self.table))

    def restart(self, node: _Node, now: float) -> None:
        node.token += 1
        if not node.mines or not self.mining_open:
            return
        level = self.table[self.next_level(node.head)]
        attempts = int(self.rng.geometric(level.success_prob))
        offset = attempts - self.rng.random()
        self.push(now + offset / node.hashrate, "mine", node.id, node.token)

    def on_mine(self, now: float, node_id: str, token: int) -> None:
        node = self.nodes[node_id]
        if token != node.token or not self.mining_open:
            return
        if now > self.config.duration_s:
            self.mining_open = False
            return
        parent = node.head
        level = self.next_level(parent)
        block_id = len(self.blocks)
        timestamp_ms = max(int(round(now * 1000)), parent.timestamp_ms)
        header = BlockHeader(
            parent_hash=parent.digest,
            number=parent.height + 1,
            timestamp_ms=timestamp_ms,
            difficulty_level=level,
            nonce=block_id,
        )
        block = _Block(
            block_id=block_id,
            height=parent.height + 1,
            parent=parent,
            miner=node_id,
            level=level,
            time_s=now,
            timestamp_ms=timestamp_ms,
            hardness=parent.hardness + expected_attempts(self.table[level]),
            digest=block_hash(header),
        )
        self.blocks.append(block)
        max_blocks = self.config.max_blocks
        if max_blocks is not None and len(self.blocks) >= max_blocks:
            self.mining_open = False

        stepped = False
        while self.steps and self.steps[0].at_height <= block.height:
            step = self.steps.pop(0)
            logger.info("Hashrate x%g at height %d (t=%.1fs)", step.factor, block.height, now)
            for other in self.nodes.values():
                other.hashrate *= step.factor
            stepped = True

        self.receive(node, block, now, sender=None)
        if stepped:
            for other in self.nodes.values():
                if other is not node:
                    self.restart(other, now)

    # --- propagation ------------------------------------------------------------

    def delay_s(self, source: _Node, target: _Node) -> float:
        mean_ms, jitter_ms = self.config.latency.lookup(source.region, target.region)
        if jitter_ms == 0:
            return mean_ms / 1000.0
        while True:
            sample = self.rng.normal(mean_ms, jitter_ms)
            if sample >= 0:
                return sample / 1000.0

    def send(self, source: _Node, block: _Block, now: float, exclude: Optional[str]) -> None:
        if self.neighbors is None:
            if source.id != block.miner:
                return
            targets = [node_id for node_id in self.nodes if node_id != source.id]
        else:
            targets = [node_id for node_id in self.neighbors[source.id] if node_id != exclude]
        for target_id in targets:
            target = self.nodes[target_id]
            self.push(now + self.delay_s(source, target), "arrive", target_id, block.block_id, source.id)

    def on_arrive(self, now: float, node_id: str, block_id: int, sender: str) -> None:
        self.receive(self.nodes[node_id], self.blocks[block_id], now, sender)

    def receive(self, node: _Node, block: _Block, now: float, sender: Optional[str]) -> None:
        if node.id in block.arrivals:
            return
        block.arrivals[node.id] = now
        self.send(node, block, now, exclude=sender)
        parent = block.parent
        if parent is not self.genesis and parent.block_id not in node.known:
            node.orphans.setdefault(parent.block_id, []).append(block)
            return
        self.connect(node, block, now)

    def connect(self, node: _Node, block: _Block, now: float) -> None:
        pending = [block]
        while pending:
            current = pending.pop(0)
            node.known.add(current.block_id)
            if current.hardness > node.head.hardness:
                node.head = current
                self.restart(node, now)
            pending.extend(node.orphans.pop(current.block_id, []))

    # --- run --------------------------------------------------------------------

    def run(self) -> SimReport:
        for node in self.nodes.values():
            self.restart(node, 0.0)
        while self.queue:
            now, _, kind, payload = heapq.heappop(self.queue)
            if kind == "mine":
                self.on_mine(now, *payload)
            else:
                self.on_arrive(now, *payload)
        return self.report()

    def canonical_tip(self) -> Optional[_Block]:
        if not self.blocks:
            return None
        return min(self.blocks, key=lambda b: (-b.hardness, b.time_s, b.digest))

    def report(self) -> SimReport:
        canonical: Set[int] = set()
        block = self.canonical_tip()
        while block is not None and block is not self.genesis:
            canonical.add(block.block_id)
            block = block.parent

        records = []
        for block in self.blocks:
            propagation = {
                node_id: int(round((block.arrivals[node_id] - block.time_s) * 1000))
                for node_id in self.nodes
                if node_id in block.arrivals
            }
            complete = len(propagation) == len(self.nodes)
            records.append(
                BlockRecord(
                    block_id=block.block_id,
                    block_hash=block.digest.hex(),
                    height=block.height,
                    parent_id=block.parent.block_id if block.parent is not self.genesis else None,
                    miner=block.miner,
                    level=block.level,
                    timestamp_ms=block.timestamp_ms,
                    bgt_ms=block.bgt_ms,
                    propagation_ms=propagation,
                    max_prop_ms=max(propagation.values()) if complete else None,
                    stale=block.block_id not in canonical,
                )
            )

        chain = sorted((r for r in records if not r.stale), key=lambda r: r.height)
        delays = [r.max_prop_ms for r in records if r.max_prop_ms is not None]
        bgts = [r.bgt_ms for r in chain]
        stale = len(records) - len(chain)
        summary = SimSummary(
            total_blocks=len(records),
            canonical_blocks=len(chain),
            stale_blocks=stale,
            fork_rate=stale / len(records) if records else 0.0,
            last_bgt_ms=bgts[-1] if bgts else None,
            mean_bgt_ms=float(np.mean(bgts)) if bgts else None,
            median_bgt_ms=float(np.median(bgts)) if bgts else None,
            network_hashrate=sum(spec.hashrate for spec in self.config.nodes if spec.role == "sealnode"),
            simulated_s=min(self.config.duration_s, self.blocks[-1].time_s) if self.blocks else 0.0,
            propagation=_bucket_shares(delays) if delays else None,
        )
        return SimReport(
            blocks=records,
            difficulty_series=[
                DifficultyPoint(height=r.height, timestamp_ms=r.timestamp_ms, level=r.level) for r in chain
            ],
            summary=summary,
        )


def resolve_table(config: SimConfig) -> DifficultyTable:
    if config.difficulty.levels is not None:
        table = DifficultyTable(levels=config.difficulty.levels)
    else:
        table = deps.get_difficulty_table()
    if config.difficulty.genesis_level >= len(table):
        raise ConfigError(
            f"level {config.difficulty.genesis_level} outside table of {len(table)} levels",
            key_path="difficulty.genesis_level",
        )
    return table


def run_simulation(config: SimConfig) -> SimReport:
    table = resolve_table(config)
    logger.info(
        "Simulating %d nodes for %.0fs (seed %d, %d difficulty levels)",
        len(config.nodes),
        config.duration_s,
        config.rng_seed,
        len(table),
    )
    report = _Simulation(config, table).run()
    logger.info(
        "Mined %d blocks, %d stale", report.summary.total_blocks, report.summary.stale_blocks
    )
    return report


def propagation_stats(report: SimReport) -> PropagationBuckets:
    """Percent of blocks whose last-node arrival falls in each delay bucket."""
    delays = [block.max_prop_ms for block in report.blocks if block.max_prop_ms is not None]
    if not delays:
        raise ParameterError("report holds no fully propagated block")
    return _bucket_shares(delays)


def _bucket_shares(delays: List[int]) -> PropagationBuckets:
    counts = [0, 0, 0, 0]
    for delay in delays:
        bucket = next((i for i, edge in enumerate(PROPAGATION_BUCKETS_MS) if delay <= edge), 3)
        counts[bucket] += 1
    shares = [100.0 * count / len(delays) for count in counts]
    return PropagationBuckets(
        upto_1s=shares[0], from_1_to_2s=shares[1], from_2_to_4s=shares[2], over_4s=shares[3]
    )


def fork_rate(report: SimReport) -> float:
    if not report.blocks:
        raise ParameterError("report holds no blocks")
    return sum(block.stale for block in report.blocks) / len(report.blocks)


def rolling_median_bgt(report: SimReport, window: int = 50) -> pd.Series:
    """Trailing median BGT of the canonical chain, indexed by height."""
    chain = report.canonical
    series = pd.Series([b.bgt_ms for b in chain], index=[b.height for b in chain], dtype=float)
    return series.rolling(window).median()


def blocks_frame(report: SimReport) -> pd.DataFrame:
    rows = [
        {
            "height": b.height,
            "miner": b.miner,
            "bgt_ms": b.bgt_ms,
            "level": b.level,
            "max_prop_ms": b.max_prop_ms,
            "stale": int(b.stale),
        }
        for b in report.blocks
    ]
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    frame["max_prop_ms"] = frame["max_prop_ms"].astype("Int64")
    return frame
