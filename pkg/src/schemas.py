from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

DIGEST_SIZE = 32
NONCE_MAX = 2**64 - 1


class LdpcParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., gt=0, description="Code length in bits")
    wc: int = Field(..., ge=2, description="Column weight (ones per column)")
    wr: int = Field(..., gt=0, description="Row weight (ones per row)")

    @model_validator(mode="after")
    def check_gallager_shape(self) -> "LdpcParams":
        if self.wr <= self.wc:
            raise ValueError(f"row weight wr={self.wr} must exceed column weight wc={self.wc}")
        if self.n % self.wr != 0:
            raise ValueError(f"row weight wr={self.wr} must divide code length n={self.n}")
        if self.m >= self.n:
            raise ValueError(f"derived m={self.m} must be smaller than n={self.n}")
        return self

    @property
    def m(self) -> int:
        """Number of parity checks, n*wc/wr."""
        return self.n * self.wc // self.wr

    @property
    def band_rows(self) -> int:
        return self.n // self.wr


class DecoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(20, ge=1, description="Message-passing iterations before giving up")
    crossover: float = Field(0.45, gt=0.0, lt=0.5, description="Assumed channel crossover probability")
    weight_window: Optional[Tuple[int, int]] = Field(
        None, description="Inclusive Hamming-weight bounds an accepted codeword must satisfy"
    )

    @field_validator("weight_window")
    @classmethod
    def check_window(cls, value: Optional[Tuple[int, int]]) -> Optional[Tuple[int, int]]:
        if value is not None:
            low, high = value
            if low < 0 or high < low:
                raise ValueError(f"weight window must satisfy 0 <= low <= high, got {value}")
        return value


class DifficultyLevel(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: LdpcParams = Field(..., description="LDPC parameters of the level")
    decoder: DecoderConfig = Field(default_factory=DecoderConfig, description="Decoder settings")
    success_prob: float = Field(..., gt=0.0, le=1.0, description="Per-nonce decoding success probability")


class DifficultyTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    levels: List[DifficultyLevel] = Field(..., min_length=1, description="Levels ordered by increasing hardness")

    @model_validator(mode="after")
    def check_monotone(self) -> "DifficultyTable":
        probs = [level.success_prob for level in self.levels]
        for index, (easier, harder) in enumerate(zip(probs, probs[1:])):
            if harder >= easier:
                raise ValueError(
                    f"success_prob must strictly decrease; level {index + 1} ({harder}) >= level {index} ({easier})"
                )
        return self

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, index: int) -> DifficultyLevel:
        return self.levels[index]


class BlockHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    parent_hash: bytes = Field(..., description="Keccak-256 hash of the parent block")
    number: int = Field(..., ge=0, lt=2**64, description="Block height")
    timestamp_ms: int = Field(..., ge=0, lt=2**64, description="Milliseconds since the epoch")
    difficulty_level: int = Field(..., ge=0, lt=2**32, description="Index into the difficulty table")
    nonce: int = Field(0, ge=0, le=NONCE_MAX, description="64-bit sealing nonce")
    codeword_digest: bytes = Field(bytes(DIGEST_SIZE), description="Keccak-256 of the packed codeword")

    @field_validator("parent_hash", "codeword_digest")
    @classmethod
    def check_digest(cls, value: bytes) -> bytes:
        if len(value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(value)}")
        return value


class SampleSet(BaseModel):
    values: List[float] = Field(..., description="Observed durations or reals")
    name: str = Field("samples", description="Label used in reports")


class Histogram(BaseModel):
    edges: List[float] = Field(..., description="Bin edges, one more than the bin count")
    counts: List[int] = Field(..., description="Observed count per bin")


class AdResult(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    a2: float = Field(..., description="Raw Anderson-Darling statistic")
    standardized: float = Field(..., description="Statistic centred and scaled by its null moments")
    p_value: float = Field(..., description="Interpolated p-value or the bound it is capped at")
    relation: Literal["=", ">=", "<="] = Field("=", description="How p_value bounds the true p-value")
    m: int = Field(..., serialization_alias="M", description="Size of the first sample")
    n: int = Field(..., serialization_alias="N", description="Size of the second sample")

    @computed_field
    @property
    def p_bound(self) -> str:
        symbol = {"=": "=", ">=": "≥", "<=": "≤"}[self.relation]
        return f"p {symbol} {self.p_value:g}"

    def report(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True, exclude={"p_value", "relation"})


# --- simulation -----------------------------------------------------------------------


class NodeSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str = Field(..., description="Unique node identifier")
    hashrate: float = Field(..., gt=0.0, description="Decoding attempts per second")
    region_tag: str = Field("seoul", alias="region", description="Label used by the latency model")
    role: Literal["sealnode", "bootnode"] = Field("sealnode", description="Bootnodes relay blocks but never mine")


class LatencyPair(BaseModel):
    a: str = Field(..., description="First region")
    b: str = Field(..., description="Second region")
    mean_ms: float = Field(..., ge=0.0, description="Mean one-way delay")
    jitter_ms: float = Field(0.0, ge=0.0, description="Standard deviation before truncation at zero")


class LatencyModel(BaseModel):
    pairs: List[LatencyPair] = Field(default_factory=list, description="Per region-pair delay parameters")
    default_mean_ms: float = Field(100.0, ge=0.0, description="Delay for region pairs not listed")
    default_jitter_ms: float = Field(30.0, ge=0.0, description="Jitter for region pairs not listed")

    def lookup(self, region_a: str, region_b: str) -> Tuple[float, float]:
        for pair in self.pairs:
            if {pair.a, pair.b} == {region_a, region_b}:
                return pair.mean_ms, pair.jitter_ms
        return self.default_mean_ms, self.default_jitter_ms

    @classmethod
    def fixed(cls, delay_ms: float) -> "LatencyModel":
        return cls(default_mean_ms=delay_ms, default_jitter_ms=0.0)


class HashrateStep(BaseModel):
    at_height: int = Field(..., ge=1, description="Height whose first mined block triggers the step")
    factor: float = Field(..., gt=0.0, description="Multiplier applied to every node's hashrate")


class DifficultySettings(BaseModel):
    genesis_level: int = Field(0, ge=0, description="Difficulty level of the first mined block")
    levels: Optional[List[DifficultyLevel]] = Field(
        None, description="Embedded difficulty table; the configured default table is used when absent"
    )


class SimConfig(BaseModel):
    nodes: List[NodeSpec] = Field(..., min_length=1, description="Participating nodes")
    topology: Union[Literal["full-mesh"], Dict[str, List[str]]] = Field(
        "full-mesh", description="Full mesh or an adjacency list keyed by node id"
    )
    latency: LatencyModel = Field(default_factory=LatencyModel, description="Propagation delay model")
    difficulty: DifficultySettings = Field(default_factory=DifficultySettings, description="Difficulty control")
    duration_s: float = Field(..., gt=0.0, description="Simulated seconds")
    rng_seed: int = Field(0, ge=0, lt=2**64, description="Seed of the simulation random stream")
    max_blocks: Optional[int] = Field(None, ge=1, description="Stop after this many mined blocks")
    hashrate_steps: List[HashrateStep] = Field(default_factory=list, description="Hashrate changes by height")

    @model_validator(mode="after")
    def check_nodes(self) -> "SimConfig":
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        if not any(node.role == "sealnode" for node in self.nodes):
            raise ValueError("at least one sealnode is required")
        if isinstance(self.topology, dict):
            known = set(ids)
            for node_id, neighbors in self.topology.items():
                unknown = ({node_id} | set(neighbors)) - known
                if unknown:
                    raise ValueError(f"topology references unknown nodes: {sorted(unknown)}")
        levels = self.difficulty.levels
        if levels is not None:
            DifficultyTable(levels=levels)
            if self.difficulty.genesis_level >= len(levels):
                raise ValueError("difficulty.genesis_level is outside the embedded table")
        return self


class BlockRecord(BaseModel):
    block_id: int = Field(..., description="Sequence number in mining order")
    block_hash: str = Field(..., description="Hex digest identifying the block")
    height: int = Field(..., description="Block height")
    parent_id: Optional[int] = Field(None, description="block_id of the parent; None for the first block")
    miner: str = Field(..., description="Id of the mining node")
    level: int = Field(..., description="Difficulty level the block was mined at")
    timestamp_ms: int = Field(..., description="Simulated mining time")
    bgt_ms: int = Field(..., description="Time since the parent block")
    propagation_ms: Dict[str, int] = Field(..., description="Arrival delay per node")
    max_prop_ms: Optional[int] = Field(None, description="Arrival delay at the last node; None if some never saw it")
    stale: bool = Field(False, description="Excluded from the canonical chain")


class DifficultyPoint(BaseModel):
    height: int
    timestamp_ms: int
    level: int


class PropagationBuckets(BaseModel):
    upto_1s: float = Field(..., description="Percent of blocks reaching every node within 1 s")
    from_1_to_2s: float = Field(..., description="Percent within (1 s, 2 s]")
    from_2_to_4s: float = Field(..., description="Percent within (2 s, 4 s]")
    over_4s: float = Field(..., description="Percent above 4 s")


class SimSummary(BaseModel):
    total_blocks: int
    canonical_blocks: int
    stale_blocks: int
    fork_rate: float
    last_bgt_ms: Optional[int]
    mean_bgt_ms: Optional[float]
    median_bgt_ms: Optional[float]
    network_hashrate: float = Field(..., description="Configured sum of sealnode hashrates")
    simulated_s: float
    propagation: Optional[PropagationBuckets] = None


class SimReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    blocks: List[BlockRecord] = Field(..., description="Every mined block in mining order")
    difficulty_series: List[DifficultyPoint] = Field(..., description="Canonical chain levels by height")
    summary: SimSummary

    @property
    def canonical(self) -> List[BlockRecord]:
        return sorted((block for block in self.blocks if not block.stale), key=lambda block: block.height)


# --- command line ---------------------------------------------------------------------


class RunManifest(BaseModel):
    command: str = Field(..., description="Sub-command that produced the outputs")
    config: Dict[str, Any] = Field(default_factory=dict, description="Fully resolved configuration")
    rng_seed: Optional[int] = Field(None, description="Seed used for random streams")
    version: str = Field(..., description="Tool version")
    started_at: datetime
    finished_at: Optional[datetime] = None
