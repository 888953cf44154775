"""Simulated master-worker execution of the coded convolution pipeline.

Workers are simulated: each one's completion time is computed from a
deterministic time model (seconds per MAC and per transmitted entry) plus
any injected straggler delay, so runs are reproducible regardless of host
scheduling.  A wall-clock mode exists for demos but is never asserted on.

Three codecs are supported:

* ``crme``            rotation-matrix code, 2+2 coded partitions per worker,
                      recovery threshold k_a*k_b/4;
* ``real-vandermonde`` classical polynomial code at equispaced real points,
                      1+1 partitions per worker, threshold k_a*k_b;
* ``uncoded``         plain replication, worker i computes block i mod Q;
                      every block needs at least one surviving replica.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import codec as _codec
from .costs import LayerDims, node_volumes
from .errors import ParameterError, ShapeError, StarvationError
from .partition import (
    ChannelPlan,
    SpatialPlan,
    merge_output,
    partition_filters,
    partition_input,
)
from .tensors import ConvParams, as_filter_tensor, as_input_tensor, conv3d_ref

CODECS = ("crme", "real-vandermonde", "uncoded")


@dataclass(frozen=True)
class WorkerSpec:
    """Behavior of one simulated worker."""

    worker_id: int
    extra_delay: float = 0.0
    failed: bool = False


@dataclass(frozen=True)
class TimeModel:
    """Simulated-clock coefficients."""

    sec_per_mac: float = 1e-9
    sec_per_entry: float = 1e-8


@dataclass(frozen=True)
class SimConfig:
    n: int
    k_a: int
    k_b: int
    params: ConvParams = ConvParams()
    codec: str = "crme"
    stragglers: tuple[WorkerSpec, ...] = ()
    seed: int = 0
    time_model: TimeModel = field(default_factory=TimeModel)
    wall_clock: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"worker count must be >= 1, got {self.n}")
        if self.codec not in CODECS:
            raise ParameterError(f"codec must be one of {CODECS}, got '{self.codec}'")
        ids = [s.worker_id for s in self.stragglers]
        if len(set(ids)) != len(ids):
            raise ParameterError(f"duplicate straggler ids: {ids}")
        if any(i < 0 or i >= self.n for i in ids):
            raise ParameterError(f"straggler ids must lie in [0, {self.n}): {ids}")
        if any(s.extra_delay < 0 for s in self.stragglers):
            raise ParameterError("straggler delays must be >= 0")

    @property
    def delta(self) -> int:
        """Results needed before decoding can start."""
        if self.codec == "crme":
            return self.k_a * self.k_b // 4
        return self.k_a * self.k_b


def place_random_stragglers(
    n: int, count: int, delay: float, seed: int, failed: bool = False
) -> tuple[WorkerSpec, ...]:
    """Seeded random straggler placement over worker ids."""
    rng = np.random.default_rng(seed)
    ids = sorted(rng.choice(n, size=count, replace=False).tolist())
    return tuple(WorkerSpec(worker_id=i, extra_delay=delay, failed=failed) for i in ids)


@dataclass(frozen=True)
class Subtask:
    """One worker's payload: coded input slices and coded filter parts."""

    worker_id: int
    coded_inputs: tuple[np.ndarray, ...]
    coded_filters: tuple[np.ndarray, ...]
    stride: int


@dataclass(frozen=True)
class WorkerOutput:
    """All pairwise convolution blocks of one worker, in canonical order."""

    worker_id: int
    blocks: tuple[np.ndarray, ...]
    completion_time: float


@dataclass(frozen=True)
class DispatchPlan:
    subtasks: tuple[Subtask, ...]
    spatial_plan: SpatialPlan
    channel_plan: ChannelPlan
    codebook: _codec.Codebook | None
    vandermonde: _codec.VandermondeCode | None
    layer: LayerDims
    block_dims: tuple[int, int, int]


def dispatch(x: np.ndarray, filt: np.ndarray, config: SimConfig) -> DispatchPlan:
    """Partition, encode, and build one subtask per worker."""
    x = as_input_tensor(x)
    filt = as_filter_tensor(filt)
    if x.shape[0] != filt.shape[1]:
        raise ShapeError(
            f"input has {x.shape[0]} channels but filter expects {filt.shape[1]}"
        )
    layer = LayerDims(
        c=x.shape[0],
        h=x.shape[1],
        w=x.shape[2],
        n_out=filt.shape[0],
        kernel_h=filt.shape[2],
        kernel_w=filt.shape[3],
        stride=config.params.stride,
        padding=config.params.padding,
    )
    spatial, slices = partition_input(x, config.k_a, config.params, filt.shape[2])
    channel, parts = partition_filters(filt, config.k_b)
    out_w = layer.out_hw[1]
    block_dims = (channel.channels_per_part, spatial.rows_per_slice_output, out_w)

    codebook = None
    vandermonde = None
    if config.codec == "crme":
        codebook = _codec.build_codebook(config.n, config.k_a, config.k_b)
        coded_x = _codec.encode_list(slices, codebook.a)
        coded_k = _codec.encode_list(parts, codebook.b)
        subtasks = tuple(
            Subtask(
                worker_id=i,
                coded_inputs=(coded_x[2 * i], coded_x[2 * i + 1]),
                coded_filters=(coded_k[2 * i], coded_k[2 * i + 1]),
                stride=config.params.stride,
            )
            for i in range(config.n)
        )
    elif config.codec == "real-vandermonde":
        vandermonde = _codec.build_vandermonde_code(config.n, config.k_a, config.k_b)
        coded_x = _codec.encode_list(slices, vandermonde.a)
        coded_k = _codec.encode_list(parts, vandermonde.b)
        subtasks = tuple(
            Subtask(
                worker_id=i,
                coded_inputs=(coded_x[i],),
                coded_filters=(coded_k[i],),
                stride=config.params.stride,
            )
            for i in range(config.n)
        )
    else:  # uncoded replication
        q = config.k_a * config.k_b
        if config.n < q:
            raise ParameterError(
                f"uncoded mode needs at least {q} workers to cover all blocks, got {config.n}"
            )
        subtasks = tuple(
            Subtask(
                worker_id=i,
                coded_inputs=(slices[(i % q) // config.k_b],),
                coded_filters=(parts[(i % q) % config.k_b],),
                stride=config.params.stride,
            )
            for i in range(config.n)
        )
    return DispatchPlan(
        subtasks=subtasks,
        spatial_plan=spatial,
        channel_plan=channel,
        codebook=codebook,
        vandermonde=vandermonde,
        layer=layer,
        block_dims=block_dims,
    )


def _phase_times(task: Subtask, block_dims, time_model: TimeModel) -> tuple[float, float, float]:
    """Simulated upload / compute / download durations for one subtask."""
    entries_in = sum(t.size for t in task.coded_inputs)  # filters are pre-stored
    blocks = len(task.coded_inputs) * len(task.coded_filters)
    block_entries = int(np.prod(block_dims))
    macs_per_entry = task.coded_filters[0].shape[1] * task.coded_filters[0].shape[2] * (
        task.coded_filters[0].shape[3]
    )
    macs = blocks * block_entries * macs_per_entry
    entries_out = blocks * block_entries
    return (
        entries_in * time_model.sec_per_entry,
        macs * time_model.sec_per_mac,
        entries_out * time_model.sec_per_entry,
    )


def worker_compute(
    task: Subtask, time_model: TimeModel, extra_delay: float = 0.0
) -> WorkerOutput:
    """Run one worker's pairwise convolutions under the simulated clock.

    Blocks come out in canonical order: input index outer, filter index
    inner, matching the generator's Kronecker column order.
    """
    params = ConvParams(stride=task.stride, padding=0)
    blocks = tuple(
        conv3d_ref(ci, cf, params)
        for ci in task.coded_inputs
        for cf in task.coded_filters
    )
    t_up, t_comp, t_down = _phase_times(task, blocks[0].shape, time_model)
    return WorkerOutput(
        worker_id=task.worker_id,
        blocks=blocks,
        completion_time=t_up + t_comp + t_down + extra_delay,
    )


def collect_first_delta(outputs, delta: int) -> list[WorkerOutput]:
    """The delta earliest results, ties broken by worker id ascending."""
    ordered = sorted(outputs, key=lambda o: (o.completion_time, o.worker_id))
    if len(ordered) < delta:
        raise StarvationError(needed=delta, responsive=len(ordered))
    return ordered[:delta]


def _collect_cover(outputs, q: int) -> list[WorkerOutput]:
    """Uncoded mode: earliest replica of every block index, or starvation."""
    best: dict[int, WorkerOutput] = {}
    for o in sorted(outputs, key=lambda o: (o.completion_time, o.worker_id)):
        block = o.worker_id % q
        if block not in best:
            best[block] = o
    if len(best) < q:
        raise StarvationError(needed=q, responsive=len(best))
    return [best[b] for b in sorted(best)]


@dataclass(frozen=True)
class SimReport:
    """Flat, serializable summary of one simulated run."""

    codec: str
    n: int
    k_a: int
    k_b: int
    delta: int
    used_workers: tuple[int, ...]
    makespan: float
    t_upload: float
    t_compute: float
    t_download: float
    kappa: float
    v_comm_up: float
    v_comm_down: float
    v_store: float
    m_comp: float

    def as_record(self) -> dict:
        rec = {
            "codec": self.codec,
            "n": self.n,
            "k_a": self.k_a,
            "k_b": self.k_b,
            "delta": self.delta,
            "used_workers": ";".join(str(i) for i in self.used_workers),
            "makespan": self.makespan,
            "t_upload": self.t_upload,
            "t_compute": self.t_compute,
            "t_download": self.t_download,
            "kappa": self.kappa,
            "v_comm_up": self.v_comm_up,
            "v_comm_down": self.v_comm_down,
            "v_store": self.v_store,
            "m_comp": self.m_comp,
        }
        return rec


def _run_workers(plan: DispatchPlan, config: SimConfig) -> list[WorkerOutput]:
    """Execute all responsive workers; failed ones never respond."""
    specs = {s.worker_id: s for s in config.stragglers}
    live = [
        (t, specs.get(t.worker_id, WorkerSpec(t.worker_id)))
        for t in plan.subtasks
        if not specs.get(t.worker_id, WorkerSpec(t.worker_id)).failed
    ]
    if not config.wall_clock:
        return [worker_compute(t, config.time_model, s.extra_delay) for t, s in live]

    # Demo-only wall-clock mode: real threads, measured times, not asserted on.
    t0 = _time.perf_counter()

    def run_one(pair):
        task, spec = pair
        if spec.extra_delay:
            _time.sleep(spec.extra_delay)
        out = worker_compute(task, config.time_model, 0.0)
        return replace(out, completion_time=_time.perf_counter() - t0)

    with ThreadPoolExecutor(max_workers=max(1, len(live))) as pool:
        return list(pool.map(run_one, live))


def _accounting_volumes(layer: LayerDims, config: SimConfig) -> tuple[float, float, float, float]:
    """Per-node accounting volumes; the coded scheme ships 2 partitions and 4 blocks."""
    vols = node_volumes(layer, config.k_a, config.k_b)
    if config.codec == "crme":
        return vols.v_comm_up, vols.v_comm_down, vols.v_store, vols.m_comp
    # one partition per operand, one output block
    return (
        vols.v_comm_up / 2.0,
        vols.v_comm_down / 4.0,
        vols.v_store / 2.0,
        vols.m_comp / 4.0,
    )


def run_end_to_end(x: np.ndarray, filt: np.ndarray, config: SimConfig) -> tuple[np.ndarray, SimReport]:
    """Dispatch, simulate workers, collect, decode, and merge one layer.

    Returns the decoded output tensor (N x H' x W') and the run report.
    Raises StarvationError if fewer than delta workers respond and
    DecodeInfeasibleError if the recovery matrix is singular.
    """
    plan = dispatch(x, filt, config)
    outputs = _run_workers(plan, config)

    if config.codec == "crme":
        used = collect_first_delta(outputs, config.delta)
        ids = [o.worker_id for o in used]
        g = _codec.joint_generator(plan.codebook)
        recovery = _codec.build_recovery(g, ids)
        blocks = _codec.decode_blocks(
            [o.blocks for o in used], recovery, config.k_a, config.k_b, plan.block_dims
        )
        kappa = recovery.kappa
    elif config.codec == "real-vandermonde":
        used = collect_first_delta(outputs, config.delta)
        ids = [o.worker_id for o in used]
        recovery = _codec.vandermonde_recovery(plan.vandermonde, ids)
        blocks = _codec.vandermonde_decode(
            [o.blocks[0] for o in used], recovery, config.k_a, config.k_b, plan.block_dims
        )
        kappa = recovery.kappa
    else:
        q = config.k_a * config.k_b
        used = _collect_cover(outputs, q)
        blocks = {
            divmod(o.worker_id % q, config.k_b): o.blocks[0] for o in used
        }
        kappa = 1.0

    y = merge_output(blocks, config.k_a, config.k_b, plan.spatial_plan)

    phase = [_phase_times(plan.subtasks[o.worker_id], plan.block_dims, config.time_model) for o in used]
    v_up, v_down, v_store, m_comp = _accounting_volumes(plan.layer, config)
    report = SimReport(
        codec=config.codec,
        n=config.n,
        k_a=config.k_a,
        k_b=config.k_b,
        delta=config.delta,
        used_workers=tuple(o.worker_id for o in used),
        makespan=max(o.completion_time for o in used),
        t_upload=max(p[0] for p in phase),
        t_compute=max(p[1] for p in phase),
        t_download=max(p[2] for p in phase),
        kappa=kappa,
        v_comm_up=v_up,
        v_comm_down=v_down,
        v_store=v_store,
        m_comp=m_comp,
    )
    return y, report
