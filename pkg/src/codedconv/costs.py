"""Per-node cost accounting and the partition-parameter optimizer.

For a fixed subtask budget Q = k_a * k_b, the per-node cost is
U(k_a) = a1*k_a + a2/k_a + a3 with a1 the storage constant, a2 the upload
constant, and a3 independent of the split.  U is strictly convex on
k_a > 0, so the continuous optimum is sqrt(a2/a1) and the discrete
optimum is found by exhaustive search over the permissible factor pairs
of Q (which doubles as the oracle the optimizer is tested against).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import ParameterError
from .partition import permissible, plan_spatial
from .tensors import ConvParams, output_dims


@dataclass(frozen=True)
class CostCoefficients:
    """Unit costs: per transmitted entry, per MAC, per stored entry."""

    lambda_comm: float
    lambda_comp: float
    lambda_store: float

    def __post_init__(self):
        for name in ("lambda_comm", "lambda_comp", "lambda_store"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class LayerDims:
    """Geometry of one convolutional layer."""

    c: int
    h: int
    w: int
    n_out: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        # raises if the kernel does not fit the padded input
        output_dims(self.h, self.w, self.conv_params, self.kernel_h, self.kernel_w)

    @property
    def conv_params(self) -> ConvParams:
        return ConvParams(stride=self.stride, padding=self.padding)

    @property
    def out_hw(self) -> tuple[int, int]:
        return output_dims(self.h, self.w, self.conv_params, self.kernel_h, self.kernel_w)


@dataclass(frozen=True)
class CostBreakdown:
    comm_up: float
    comm_down: float
    comp: float
    store: float

    @property
    def total(self) -> float:
        return self.comm_up + self.comm_down + self.comp + self.store


def total_cost(dims: LayerDims, coeffs: CostCoefficients, k_a: int, k_b: int) -> CostBreakdown:
    """Closed-form per-node cost of the (k_a, k_b) split.

    comm_up   lambda_comm * 4*C*(H+2p)*(W+2p) / k_a
    comm_down lambda_comm * 4*N*H'*W' / Q
    comp      lambda_comp * 4*C*N*H*W*K_H*K_W / (s^2 * Q)
    store     lambda_store * 2*N*C*K_H*K_W * k_a / Q
    """
    if k_a < 1 or k_b < 1:
        raise ParameterError(f"partition counts must be >= 1, got ({k_a}, {k_b})")
    q = k_a * k_b
    hp = dims.h + 2 * dims.padding
    wp = dims.w + 2 * dims.padding
    out_h, out_w = dims.out_hw
    kk = dims.kernel_h * dims.kernel_w
    return CostBreakdown(
        comm_up=coeffs.lambda_comm * 4.0 * dims.c * hp * wp / k_a,
        comm_down=coeffs.lambda_comm * 4.0 * dims.n_out * out_h * out_w / q,
        comp=coeffs.lambda_comp * 4.0 * dims.c * dims.n_out * dims.h * dims.w * kk
        / (dims.stride**2 * q),
        store=coeffs.lambda_store * 2.0 * dims.n_out * dims.c * kk * k_a / q,
    )


@dataclass(frozen=True)
class NodeVolumes:
    """Per-node accounting volumes, matching the simulator's report fields."""

    v_comm_up: float
    v_comm_down: float
    v_store: float
    m_comp: float


def node_volumes(dims: LayerDims, k_a: int, k_b: int) -> NodeVolumes:
    """Exact per-node volumes of the coded split.

    Upload counts the two coded slices at their true slice height; the
    remaining terms are the per-node shares of output, filter storage,
    and MACs.
    """
    plan = plan_spatial(dims.h, k_a, dims.conv_params, dims.kernel_h)
    wp = dims.w + 2 * dims.padding
    out_h, out_w = dims.out_hw
    kk = dims.kernel_h * dims.kernel_w
    q = k_a * k_b
    return NodeVolumes(
        v_comm_up=2.0 * dims.c * plan.slice_height * wp,
        v_comm_down=4.0 * dims.n_out * out_h * out_w / q,
        v_store=2.0 * dims.n_out * dims.c * kk / k_b,
        m_comp=4.0 * dims.c * dims.n_out * dims.h * dims.w * kk / (dims.stride**2 * q),
    )


def optimal_continuous(dims: LayerDims, coeffs: CostCoefficients, q: int) -> float:
    """Real-valued minimizer of U at fixed Q.

    k_a* = sqrt(2 * lambda_comm * (H+2p)*(W+2p) * Q / (lambda_store * N * K_H * K_W)).
    """
    denom = coeffs.lambda_store * dims.n_out * dims.kernel_h * dims.kernel_w
    if denom <= 0.0:
        raise ParameterError("storage term is zero: the continuous optimum is unbounded")
    hp = dims.h + 2 * dims.padding
    wp = dims.w + 2 * dims.padding
    return float((2.0 * coeffs.lambda_comm * hp * wp * q / denom) ** 0.5)


def factor_pairs(q: int) -> list[tuple[int, int]]:
    """All (k_a, k_b) with k_a*k_b = Q and both factors 1 or even, k_a ascending."""
    if q < 1:
        raise ParameterError(f"Q must be >= 1, got {q}")
    pairs = [
        (d, q // d)
        for d in range(1, q + 1)
        if q % d == 0 and permissible(d) and permissible(q // d)
    ]
    if not pairs:
        raise ParameterError(f"Q={q} has no factorization into permissible partition counts")
    return pairs


def optimize_discrete(
    dims: LayerDims, coeffs: CostCoefficients, q: int
) -> tuple[int, int, CostBreakdown]:
    """Minimum-cost permissible factor pair of Q, ties broken toward smaller k_a."""
    if coeffs.lambda_comm == 0.0 and coeffs.lambda_comp == 0.0 and coeffs.lambda_store == 0.0:
        raise ParameterError("all cost coefficients are zero; nothing to optimize")
    best = None
    for k_a, k_b in factor_pairs(q):
        breakdown = total_cost(dims, coeffs, k_a, k_b)
        if best is None or breakdown.total < best[2].total:
            best = (k_a, k_b, breakdown)
    return best


# ---------------------------------------------------------------------------
# Layer-geometry registry.  The source paper of each architecture defines the
# canonical dims; entries are externally sourced and versioned in-repo.
# ---------------------------------------------------------------------------


def load_registry() -> dict:
    """Raw registry of canonical CNN layer geometries, keyed by model name."""
    text = resources.files("codedconv").joinpath("data/layer_registry.json").read_text()
    return json.loads(text)


def registry_layers(model: str) -> list[tuple[str, LayerDims]]:
    """Named LayerDims for one registry model; raises on unknown names."""
    registry = load_registry()
    if model not in registry:
        raise ParameterError(
            f"unknown model '{model}'; registry has {sorted(registry)}"
        )
    out = []
    for entry in registry[model]["layers"]:
        dims = LayerDims(
            c=entry["c"],
            h=entry["h"],
            w=entry["w"],
            n_out=entry["n_out"],
            kernel_h=entry["kernel_h"],
            kernel_w=entry["kernel_w"],
            stride=entry["stride"],
            padding=entry["padding"],
        )
        out.append((entry["name"], dims))
    return out
