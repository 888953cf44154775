"""Shared test helpers: independent brute-force oracles.

These stay deliberately dumb (pure Python loops over the defining sums) so
they exercise none of the code paths they are used to check.
"""

import numpy as np


def conv_loop(x, filt, stride=1, padding=0):
    """Six-level loop evaluation of the convolution sum, zero-padded input."""
    c, h, w = x.shape
    n_out, _, kh, kw = filt.shape
    xp = np.zeros((c, h + 2 * padding, w + 2 * padding))
    xp[:, padding : padding + h, padding : padding + w] = x
    out_h = (xp.shape[1] - kh) // stride + 1
    out_w = (xp.shape[2] - kw) // stride + 1
    out = np.zeros((n_out, out_h, out_w))
    for n in range(n_out):
        for oh in range(out_h):
            for ow in range(out_w):
                acc = 0.0
                for ci in range(c):
                    for i in range(kh):
                        for j in range(kw):
                            acc += xp[ci, stride * oh + i, stride * ow + j] * filt[n, ci, i, j]
                out[n, oh, ow] = acc
    return out


def valid_positions(extent, kernel, stride):
    """Count window start offsets by explicit enumeration."""
    count = 0
    start = 0
    while start + kernel <= extent:
        count += 1
        start += stride
    return count
