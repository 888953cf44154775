"""Spatial partitioning of inputs, channel partitioning of filters, and the merge.

The input tensor is cut along its height into overlapping slices sized so
that convolving slice ``i`` with the full filter yields exactly the ``i``-th
band of output rows.  The filter tensor is cut along its output-channel
axis into disjoint parts.  ``merge_output`` is the exact inverse of the
two cuts on the output side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .tensors import ConvParams, as_filter_tensor, as_input_tensor, concat_axis, pad_input


def permissible(k: int) -> bool:
    """Partition counts must be 1 or even."""
    return k == 1 or (k >= 2 and k % 2 == 0)


@dataclass(frozen=True)
class SpatialPlan:
    """Geometry of the overlapping height slices.

    slice_height      rows per slice: (out_height_padded/k_a - 1)*s + K_H
    slice_stride      row offset between slice starts: (out_height_padded/k_a)*s
    out_height        true output height of the layer
    out_height_padded out_height rounded up to a multiple of k_a
    rows_added        zero rows appended below the padded input for divisibility
    """

    k_a: int
    slice_height: int
    slice_stride: int
    out_height: int
    out_height_padded: int
    rows_added: int

    @property
    def rows_per_slice_output(self) -> int:
        return self.out_height_padded // self.k_a


def plan_spatial(height: int, k_a: int, params: ConvParams, kernel_h: int) -> SpatialPlan:
    """Compute the slice geometry for an input of the given (unpadded) height."""
    if not permissible(k_a):
        raise ParameterError(f"k_a must be 1 or even, got {k_a}")
    padded_h = height + 2 * params.padding
    if padded_h < kernel_h:
        raise ShapeError(f"kernel height {kernel_h} exceeds padded input height {padded_h}")
    out_h = (padded_h - kernel_h) // params.stride + 1
    if out_h < k_a:
        raise ParameterError(
            f"output height {out_h} admits at most {out_h} slices, requested {k_a}"
        )
    out_h_padded = -(-out_h // k_a) * k_a
    rows_added = max(0, (out_h_padded - 1) * params.stride + kernel_h - padded_h)
    per = out_h_padded // k_a
    return SpatialPlan(
        k_a=k_a,
        slice_height=(per - 1) * params.stride + kernel_h,
        slice_stride=per * params.stride,
        out_height=out_h,
        out_height_padded=out_h_padded,
        rows_added=rows_added,
    )


def partition_input(
    x: np.ndarray, k_a: int, params: ConvParams, kernel_h: int
) -> tuple[SpatialPlan, list[np.ndarray]]:
    """Cut the input into k_a overlapping slices of shape C x slice_height x (W+2p).

    Zero padding (both the convolution padding and any divisibility rows at
    the bottom) is materialized before slicing, so slice ``i`` covers input
    rows [i*slice_stride, i*slice_stride + slice_height).
    """
    x = as_input_tensor(x)
    plan = plan_spatial(x.shape[1], k_a, params, kernel_h)
    xp = pad_input(x, params.padding)
    if plan.rows_added:
        xp = np.concatenate(
            [xp, np.zeros((xp.shape[0], plan.rows_added, xp.shape[2]))], axis=1
        )
    last = (k_a - 1) * plan.slice_stride + plan.slice_height
    assert last <= xp.shape[1], "slice extends past padded input"
    slices = [
        xp[:, i * plan.slice_stride : i * plan.slice_stride + plan.slice_height, :]
        for i in range(k_a)
    ]
    return plan, slices


@dataclass(frozen=True)
class ChannelPlan:
    """Disjoint output-channel split of the filter tensor."""

    k_b: int
    channels_per_part: int


def partition_filters(filt: np.ndarray, k_b: int) -> tuple[ChannelPlan, list[np.ndarray]]:
    """Cut the filter tensor into k_b disjoint output-channel groups."""
    filt = as_filter_tensor(filt)
    if not permissible(k_b):
        raise ParameterError(f"k_b must be 1 or even, got {k_b}")
    n_out = filt.shape[0]
    if n_out % k_b != 0:
        raise ShapeError(f"{n_out} output channels not divisible by k_b={k_b}")
    per = n_out // k_b
    plan = ChannelPlan(k_b=k_b, channels_per_part=per)
    parts = [filt[i * per : (i + 1) * per] for i in range(k_b)]
    return plan, parts


def merge_output(
    blocks: dict[tuple[int, int], np.ndarray], k_a: int, k_b: int, plan: SpatialPlan
) -> np.ndarray:
    """Reassemble the k_a x k_b output blocks into the full N x H' x W' tensor.

    Blocks sharing a channel group are stacked along the height axis in
    slice order, the stacks are concatenated along the channel axis, and
    the divisibility rows below the true output height are trimmed.
    """
    expected = None
    for u_a in range(k_a):
        for u_b in range(k_b):
            if (u_a, u_b) not in blocks:
                raise ShapeError(f"missing output block ({u_a}, {u_b})")
            shape = blocks[(u_a, u_b)].shape
            if expected is None:
                expected = shape
            elif shape != expected:
                raise ShapeError(f"block ({u_a}, {u_b}) has shape {shape}, expected {expected}")
    if expected[1] != plan.rows_per_slice_output:
        raise ShapeError(
            f"blocks carry {expected[1]} output rows, plan expects {plan.rows_per_slice_output}"
        )
    channel_groups = [
        concat_axis([blocks[(u_a, u_b)] for u_a in range(k_a)], axis=1)
        for u_b in range(k_b)
    ]
    full = concat_axis(channel_groups, axis=0)
    return full[:, : plan.out_height, :]
