"""Rotation-matrix coding of tensor partition lists, plus a real-Vandermonde baseline.

The encoder works over the reals but inherits the conditioning of complex
Vandermonde systems whose nodes sit on the unit circle: every scalar
evaluation point of a classical polynomial code is replaced by a 2x2
rotation block, so each worker holds two coded partitions per operand and
computes four pairwise convolutions.  Any ``delta = k_a*k_b/4`` workers
then determine a square recovery matrix built from per-worker Kronecker
column blocks, and decoding is a dense solve against its inverse.

The baseline codec evaluates ordinary polynomials at equispaced real
points; its recovery matrices are classical Vandermonde submatrices and
degrade exponentially with the threshold, which is exactly the contrast
the stability experiments measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodeInfeasibleError, ParameterError, ShapeError

# A recovery matrix whose sigma_min/sigma_max falls below this is treated as
# singular: below double-precision trust, inversion results are noise.
SINGULAR_RATIO = 1e-13


def next_odd(n: int) -> int:
    """Smallest odd integer >= n."""
    return n if n % 2 == 1 else n + 1


def rotation_matrix(theta: float) -> np.ndarray:
    """The 2x2 rotation by ``theta`` radians (orthogonal, determinant 1)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Codebook:
    """Encoding matrices for one (n, k_a, k_b) configuration.

    ``a`` (k_a x 2n) encodes the input-slice list, ``b`` (k_b x 2n) the
    filter-part list.  Block (i, j) of ``a`` is the rotation by
    j*i*theta; block (i, j) of ``b`` is the rotation by j*(k_a/2)*i*theta,
    with theta = 2*pi/q for the smallest odd q >= n.
    """

    n: int
    q: int
    theta: float
    k_a: int
    k_b: int
    a: np.ndarray
    b: np.ndarray

    @property
    def delta(self) -> int:
        """Recovery threshold: results needed before decoding can start."""
        return self.k_a * self.k_b // 4


def _rotation_block_matrix(block_rows: int, n: int, theta: float, col_step: int) -> np.ndarray:
    """Assemble a (2*block_rows) x (2n) matrix of rotation powers.

    Block (i, j) is the rotation by (j * col_step) * i * theta; powers of a
    rotation are evaluated as a single rotation by the summed angle.
    """
    m = np.zeros((2 * block_rows, 2 * n))
    for i in range(block_rows):
        for j in range(n):
            m[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = rotation_matrix((j * col_step) * i * theta)
    return m


def build_codebook(n: int, k_a: int, k_b: int) -> Codebook:
    """Construct the encoding matrices for n workers and even partition counts.

    Requires k_a, k_b even and >= 2 and delta = k_a*k_b/4 <= n.  Factor-1
    configurations are rejected here; the runtime falls back to uncoded
    replication for those.
    """
    if n < 1:
        raise ParameterError(f"worker count must be >= 1, got {n}")
    if k_a < 2 or k_a % 2 != 0 or k_b < 2 or k_b % 2 != 0:
        raise ParameterError(
            f"rotation coding needs even k_a and k_b >= 2, got ({k_a}, {k_b})"
        )
    delta = k_a * k_b // 4
    if delta > n:
        raise ParameterError(
            f"recovery threshold {delta} exceeds worker count {n}"
        )
    q = next_odd(n)
    theta = 2.0 * np.pi / q
    a = _rotation_block_matrix(k_a // 2, n, theta, col_step=1)
    b = _rotation_block_matrix(k_b // 2, n, theta, col_step=k_a // 2)
    return Codebook(n=n, q=q, theta=theta, k_a=k_a, k_b=k_b, a=a, b=b)


def encode_list(parts: list[np.ndarray], mat: np.ndarray) -> list[np.ndarray]:
    """Multiply a tensor list by a matrix: output j = sum_i mat[i, j] * parts[i]."""
    if len(parts) != mat.shape[0]:
        raise ShapeError(f"{len(parts)} tensors cannot be encoded by {mat.shape[0]} rows")
    ref = parts[0].shape
    for p in parts[1:]:
        if p.shape != ref:
            raise ShapeError(f"tensor shapes differ: {p.shape} vs {ref}")
    stacked = np.stack(parts)
    encoded = np.einsum("i...,ij->j...", stacked, mat)
    return [encoded[j] for j in range(mat.shape[1])]


def joint_generator(book: Codebook) -> np.ndarray:
    """Per-worker Kronecker products of the encoding column blocks.

    Column block i (4 columns) is kron(a[:, 2i:2i+2], b[:, 2i:2i+2]); row
    r corresponds to the uncoded block pair (u_a, u_b) = divmod(r, k_b).
    """
    blocks = [
        np.kron(book.a[:, 2 * i : 2 * i + 2], book.b[:, 2 * i : 2 * i + 2])
        for i in range(book.n)
    ]
    return np.hstack(blocks)


@dataclass(frozen=True)
class RecoverySet:
    """A decodable worker subset with its recovery matrix and inverse."""

    worker_ids: tuple[int, ...]
    matrix: np.ndarray
    inverse: np.ndarray
    kappa: float


def _invert_recovery(e: np.ndarray, worker_ids, min_ratio: float) -> RecoverySet:
    sv = np.linalg.svd(e, compute_uv=False)
    kappa = float("inf") if sv[-1] == 0.0 else float(sv[0] / sv[-1])
    if sv[-1] == 0.0 or sv[-1] / sv[0] < min_ratio:
        raise DecodeInfeasibleError(kappa, worker_ids)
    # LAPACK dense inversion (partial pivoting); delta stays small at this scale.
    d = np.linalg.inv(e)
    return RecoverySet(worker_ids=tuple(worker_ids), matrix=e, inverse=d, kappa=kappa)


def build_recovery(g: np.ndarray, worker_ids, *, cols_per_worker: int = 4) -> RecoverySet:
    """Assemble and invert the recovery matrix for an ordered worker subset.

    ``g`` is the joint generator; the subset must have exactly
    rows/cols_per_worker distinct ids so the selected column blocks form a
    square matrix.
    """
    worker_ids = list(worker_ids)
    n = g.shape[1] // cols_per_worker
    if len(set(worker_ids)) != len(worker_ids):
        raise ParameterError(f"worker ids must be distinct, got {worker_ids}")
    if any(i < 0 or i >= n for i in worker_ids):
        raise ParameterError(f"worker ids must lie in [0, {n}), got {worker_ids}")
    if len(worker_ids) * cols_per_worker != g.shape[0]:
        raise ParameterError(
            f"{len(worker_ids)} workers supply {len(worker_ids) * cols_per_worker} "
            f"columns, need {g.shape[0]}"
        )
    e = np.hstack([g[:, cols_per_worker * i : cols_per_worker * (i + 1)] for i in worker_ids])
    return _invert_recovery(e, worker_ids, SINGULAR_RATIO)


def _decode_columns(collected, recovery: RecoverySet) -> np.ndarray:
    """Stack collected blocks as columns, apply the decoding matrix."""
    cols = []
    for blocks in collected:
        cols.extend(np.asarray(b, dtype=np.float64).reshape(-1) for b in blocks)
    stacked = np.stack(cols, axis=1)
    if stacked.shape[1] != recovery.matrix.shape[1]:
        raise ShapeError(
            f"{stacked.shape[1]} collected columns, recovery matrix expects "
            f"{recovery.matrix.shape[1]}"
        )
    return stacked @ recovery.inverse


def decode_blocks(
    collected,
    recovery: RecoverySet,
    k_a: int,
    k_b: int,
    block_dims: tuple[int, int, int],
) -> dict[tuple[int, int], np.ndarray]:
    """Recover the uncoded output blocks from ordered worker results.

    ``collected`` holds, per worker in ``recovery.worker_ids`` order, the
    four coded blocks in canonical order (input index outer, filter index
    inner), matching the generator's Kronecker column order.  Decoded
    column r maps to block (u_a, u_b) = divmod(r, k_b).
    """
    if len(collected) != len(recovery.worker_ids):
        raise ShapeError(
            f"{len(collected)} worker results but recovery set lists "
            f"{len(recovery.worker_ids)} workers"
        )
    for blocks in collected:
        if len(blocks) != 4:
            raise ShapeError(f"each worker must contribute 4 blocks, got {len(blocks)}")
        for b in blocks:
            if tuple(b.shape) != tuple(block_dims):
                raise ShapeError(f"block shape {b.shape} differs from {tuple(block_dims)}")
    decoded = _decode_columns(collected, recovery)
    out = {}
    for r in range(k_a * k_b):
        out[divmod(r, k_b)] = decoded[:, r].reshape(block_dims)
    return out


def condition_number(m: np.ndarray) -> float:
    """2-norm condition number sigma_max / sigma_min of a square matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"condition number needs a square matrix, got {m.shape}")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] == 0.0:
        return float("inf")
    return float(sv[0] / sv[-1])


# ---------------------------------------------------------------------------
# Real-Vandermonde baseline (classical polynomial code, one coded pair per
# worker, recovery threshold k_a * k_b).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VandermondeCode:
    """Baseline polynomial code over equispaced real evaluation points.

    Worker j evaluates the coded product polynomial at ``points[j]``:
    its single output equals sum_r points[j]**r * block_r, where block
    index r = u_a + u_b * k_a.
    """

    n: int
    k_a: int
    k_b: int
    points: np.ndarray
    a: np.ndarray  # k_a x n, row a holds points**a
    b: np.ndarray  # k_b x n, row b holds points**(b * k_a)
    generator: np.ndarray  # (k_a*k_b) x n, row r holds points**r

    @property
    def delta(self) -> int:
        return self.k_a * self.k_b


def build_vandermonde_code(n: int, k_a: int, k_b: int) -> VandermondeCode:
    """Baseline generator over n equispaced points on [-1, 1].

    Equispaced real nodes are the standard ill-conditioned choice; the
    recovery threshold is the full k_a * k_b since each worker returns a
    single coded block.
    """
    if k_a < 1 or k_b < 1:
        raise ParameterError(f"partition counts must be >= 1, got ({k_a}, {k_b})")
    threshold = k_a * k_b
    if threshold > n:
        raise ParameterError(f"recovery threshold {threshold} exceeds worker count {n}")
    if n == 1:
        points = np.zeros(1)
    else:
        points = -1.0 + 2.0 * np.arange(n) / (n - 1)
    if len(np.unique(points)) != n:
        raise ParameterError("evaluation points must be distinct")
    a = np.vstack([points**e for e in range(k_a)])
    b = np.vstack([points ** (e * k_a) for e in range(k_b)])
    generator = np.vstack([points**r for r in range(threshold)])
    return VandermondeCode(n=n, k_a=k_a, k_b=k_b, points=points, a=a, b=b, generator=generator)


def vandermonde_recovery(code: VandermondeCode, worker_ids) -> RecoverySet:
    """Square Vandermonde submatrix for an ordered worker subset.

    Unlike the rotation codec, the baseline inverts even badly conditioned
    systems (raising only on exact singularity): its decode error under
    ill-conditioning is precisely what the stability experiments measure.
    """
    worker_ids = list(worker_ids)
    if len(set(worker_ids)) != len(worker_ids):
        raise ParameterError(f"worker ids must be distinct, got {worker_ids}")
    if any(i < 0 or i >= code.n for i in worker_ids):
        raise ParameterError(f"worker ids must lie in [0, {code.n}), got {worker_ids}")
    if len(worker_ids) != code.delta:
        raise ParameterError(f"need {code.delta} workers, got {len(worker_ids)}")
    e = code.generator[:, worker_ids]
    return _invert_recovery(e, worker_ids, min_ratio=0.0)


def vandermonde_decode(
    collected,
    recovery: RecoverySet,
    k_a: int,
    k_b: int,
    block_dims: tuple[int, int, int],
) -> dict[tuple[int, int], np.ndarray]:
    """Decode baseline results: one block per worker, column r -> (r % k_a, r // k_a)."""
    if len(collected) != len(recovery.worker_ids):
        raise ShapeError(
            f"{len(collected)} worker results but recovery set lists "
            f"{len(recovery.worker_ids)} workers"
        )
    decoded = _decode_columns([[b] for b in collected], recovery)
    out = {}
    for r in range(k_a * k_b):
        out[(r % k_a, r // k_a)] = decoded[:, r].reshape(block_dims)
    return out
