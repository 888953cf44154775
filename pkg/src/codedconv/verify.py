"""Built-in invariant suite behind ``codedconv verify``.

Each check is a fast, seeded re-statement of a core correctness property;
the pytest suite covers the same ground (and more) at larger sizes.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import codec as _codec
from .costs import CostCoefficients, LayerDims, factor_pairs, node_volumes, optimize_discrete, total_cost
from .partition import merge_output, partition_filters, partition_input
from .simulation import SimConfig, WorkerSpec, run_end_to_end
from .tensors import ConvParams, conv3d_ref, mse, reshape, vec


def _check_vec_reshape(rng):
    for dims in [(1, 1, 2), (2, 3, 4), (4, 8, 8)]:
        t = rng.standard_normal(dims)
        if not np.array_equal(reshape(vec(t), dims), t):
            return f"vec/reshape round trip failed for dims {dims}"
    return None


def _check_conv_bilinear(rng):
    params = ConvParams()
    x1 = rng.standard_normal((2, 8, 8))
    x2 = rng.standard_normal((2, 8, 8))
    k = rng.standard_normal((2, 2, 3, 3))
    lhs = conv3d_ref(1.7 * x1 - 0.3 * x2, k, params)
    rhs = 1.7 * conv3d_ref(x1, k, params) - 0.3 * conv3d_ref(x2, k, params)
    err = np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs)))
    return None if err < 1e-12 else f"conv bilinearity error {err:.3e}"


def _check_uncoded_round_trip(rng):
    params = ConvParams(stride=1, padding=1)
    x = rng.standard_normal((2, 12, 10))
    filt = rng.standard_normal((4, 2, 3, 3))
    reference = conv3d_ref(x, filt, params)
    plan, slices = partition_input(x, 4, params, 3)
    _, parts = partition_filters(filt, 2)
    blocks = {
        (ua, ub): conv3d_ref(slices[ua], parts[ub], ConvParams(stride=1, padding=0))
        for ua in range(4)
        for ub in range(2)
    }
    merged = merge_output(blocks, 4, 2, plan)
    if not np.array_equal(merged, reference):
        return "uncoded partition/merge is not bitwise exact"
    return None


def _check_kron_identity(rng):
    book = _codec.build_codebook(6, 4, 4)
    t_a = [rng.standard_normal((2, 6, 6)) for _ in range(4)]
    t_b = [rng.standard_normal((2, 2, 2, 2)) for _ in range(4)]
    params = ConvParams()
    t_c = [conv3d_ref(a, b, params) for a in t_a for b in t_b]
    coded_a = _codec.encode_list(t_a, book.a)
    coded_b = _codec.encode_list(t_b, book.b)
    g = _codec.joint_generator(book)
    for i in range(book.n):
        gi = g[:, 4 * i : 4 * i + 4]
        blocks = [
            conv3d_ref(coded_a[2 * i + b1], coded_b[2 * i + b2], params)
            for b1 in range(2)
            for b2 in range(2)
        ]
        for c in range(4):
            want = sum(gi[r, c] * t_c[r] for r in range(16))
            if np.max(np.abs(blocks[c] - want)) > 1e-10:
                return f"worker {i} column {c} violates the Kronecker identity"
    return None


def _check_all_subsets(rng):
    x = rng.standard_normal((2, 9, 7))
    filt = rng.standard_normal((8, 2, 2, 2))
    reference = conv3d_ref(x, filt, ConvParams())
    for subset in itertools.combinations(range(6), 4):
        failed = tuple(i for i in range(6) if i not in subset)
        cfg = SimConfig(
            n=6,
            k_a=4,
            k_b=4,
            stragglers=tuple(WorkerSpec(worker_id=i, failed=True) for i in failed),
        )
        y, _ = run_end_to_end(x, filt, cfg)
        if np.max(np.abs(y - reference)) > 1e-8:
            return f"subset {subset} failed to decode"
    return None


def _check_end_to_end(rng):
    cfg = SimConfig(n=8, k_a=2, k_b=4, params=ConvParams(stride=2, padding=1))
    x = rng.standard_normal((3, 13, 11))
    filt = rng.standard_normal((8, 3, 3, 3))
    y, _ = run_end_to_end(x, filt, cfg)
    err = mse(y, conv3d_ref(x, filt, ConvParams(stride=2, padding=1)))
    return None if err <= 1e-20 else f"end-to-end MSE {err:.3e} > 1e-20"


def _check_cost_convexity(rng):
    for _ in range(20):
        dims = LayerDims(
            c=int(rng.integers(1, 8)),
            h=int(rng.integers(8, 64)),
            w=int(rng.integers(8, 64)),
            n_out=int(rng.integers(1, 64)),
            kernel_h=int(rng.integers(1, 5)),
            kernel_w=int(rng.integers(1, 5)),
        )
        coeffs = CostCoefficients(
            lambda_comm=float(rng.uniform(0.01, 1.0)),
            lambda_comp=0.0,
            lambda_store=float(rng.uniform(0.01, 1.0)),
        )
        grid = [2, 4, 6, 8, 10, 12]
        u = [total_cost(dims, coeffs, k, 2).total for k in grid]
        second = [u[i - 1] - 2 * u[i] + u[i + 1] for i in range(1, len(u) - 1)]
        if any(d <= 0 for d in second):
            return "cost second difference is not positive"
        q = 16
        best = optimize_discrete(dims, coeffs, q)
        brute = min(
            ((ka, kb, total_cost(dims, coeffs, ka, kb)) for ka, kb in factor_pairs(q)),
            key=lambda t: (t[2].total, t[0]),
        )
        if (best[0], best[1]) != (brute[0], brute[1]):
            return f"optimizer {(best[0], best[1])} != oracle {(brute[0], brute[1])}"
    return None


def _check_volume_accounting(rng):
    layer = LayerDims(c=2, h=16, w=16, n_out=8, kernel_h=3, kernel_w=3)
    cfg = SimConfig(n=4, k_a=2, k_b=4)
    x, filt = rng.standard_normal((2, 16, 16)), rng.standard_normal((8, 2, 3, 3))
    _, report = run_end_to_end(x, filt, cfg)
    vols = node_volumes(layer, 2, 4)
    pairs = [
        (report.v_comm_up, vols.v_comm_up),
        (report.v_comm_down, vols.v_comm_down),
        (report.v_store, vols.v_store),
        (report.m_comp, vols.m_comp),
    ]
    if any(a != b for a, b in pairs):
        return f"volume mismatch: {pairs}"
    return None


def _check_determinism(rng):
    x = rng.standard_normal((2, 10, 10))
    filt = rng.standard_normal((4, 2, 3, 3))
    cfg = SimConfig(n=4, k_a=2, k_b=2, seed=11)
    y1, r1 = run_end_to_end(x, filt, cfg)
    y2, r2 = run_end_to_end(x, filt, cfg)
    if not np.array_equal(y1, y2) or r1 != r2:
        return "repeated runs differ under an identical config"
    return None


CHECKS = [
    ("vec/reshape round trip", _check_vec_reshape),
    ("convolution bilinearity", _check_conv_bilinear),
    ("uncoded partition/merge round trip", _check_uncoded_round_trip),
    ("encoded-worker Kronecker identity", _check_kron_identity),
    ("any-subset decodability (4,4,n=6)", _check_all_subsets),
    ("end-to-end exactness", _check_end_to_end),
    ("cost convexity and optimizer oracle", _check_cost_convexity),
    ("volume accounting agreement", _check_volume_accounting),
    ("report determinism", _check_determinism),
]


def run_all(verbose: bool = True) -> bool:
    ok = True
    for name, fn in CHECKS:
        problem = fn(np.random.default_rng(2024))
        if problem is None:
            if verbose:
                print(f"PASS {name}")
        else:
            ok = False
            if verbose:
                print(f"FAIL {name}: {problem}")
    return ok
