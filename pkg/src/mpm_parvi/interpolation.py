"""B-spline interpolation kernels and particle-to-node weight stencils.

Weights couple each particle to the grid nodes inside the kernel support.
In d dimensions a weight is the tensor product of d one-dimensional kernel
values of r = (x_p - x_i)/h, and its gradient follows the product rule with
a 1/h scale on the differentiated factor.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec


class OutOfDomainError(ValueError):
    """A particle sits closer than one support radius to the grid boundary."""


class KernelKind(enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    CUBIC = "cubic"

    @property
    def support_radius(self) -> float:
        return _SUPPORT[self]

    @property
    def axis_nodes(self) -> int:
        """Nodes per axis covered by the support window."""
        return _AXIS_NODES[self]


_SUPPORT = {KernelKind.LINEAR: 1.0, KernelKind.QUADRATIC: 1.5, KernelKind.CUBIC: 2.0}
_AXIS_NODES = {KernelKind.LINEAR: 2, KernelKind.QUADRATIC: 3, KernelKind.CUBIC: 4}


def kernel_eval(kernel: KernelKind, r) -> np.ndarray:
    """One-dimensional kernel value K(r). Even in r, zero outside the support.

    Branch boundaries belong to the outer branch (|r| < boundary is inner).
    """
    a = np.abs(np.asarray(r, dtype=float))
    if kernel is KernelKind.LINEAR:
        return np.where(a < 1.0, 1.0 - a, 0.0)
    if kernel is KernelKind.QUADRATIC:
        outer = np.where(a < 1.5, 0.5 * (1.5 - a) ** 2, 0.0)
        return np.where(a < 0.5, 0.75 - a * a, outer)
    outer = np.where(a < 2.0, (2.0 - a) ** 3 / 6.0, 0.0)
    return np.where(a < 1.0, 0.5 * a**3 - a * a + 2.0 / 3.0, outer)


def kernel_grad(kernel: KernelKind, r) -> np.ndarray:
    """Derivative K'(r) of the 1D kernel; odd in r, continuous for the C1 kernels."""
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    s = np.sign(r)
    if kernel is KernelKind.LINEAR:
        return np.where(a < 1.0, -s, 0.0)
    if kernel is KernelKind.QUADRATIC:
        outer = np.where(a < 1.5, -s * (1.5 - a), 0.0)
        return np.where(a < 0.5, -2.0 * r, outer)
    outer = np.where(a < 2.0, -0.5 * s * (2.0 - a) ** 2, 0.0)
    return np.where(a < 1.0, s * (1.5 * a * a - 2.0 * a), outer)


@dataclass
class WeightStencil:
    """Nodes with nonzero weight for one particle, plus weights and gradients."""

    node_indices: np.ndarray  # (n, d) int multi-indices
    weights: np.ndarray  # (n,)
    weight_gradients: np.ndarray  # (n, d), d/dx_p of each weight


@dataclass
class StencilBatch:
    """Fixed-size support windows for a whole particle set.

    Zero-weight window entries are kept (they contribute nothing), which keeps
    every array rectangular: S = axis_nodes^d entries per particle.
    """

    flat_indices: np.ndarray  # (M, S) int64 row-major node ids
    weights: np.ndarray  # (M, S)
    gradients: np.ndarray  # (M, S, d)
    node_offsets: np.ndarray  # (M, S, d) = x_i - x_p


def _axis_base(kernel: KernelKind, u: np.ndarray) -> np.ndarray:
    # u is the position in grid-index units; returns the lowest window index.
    if kernel is KernelKind.LINEAR:
        return np.floor(u).astype(np.int64)
    if kernel is KernelKind.QUADRATIC:
        return np.floor(u - 0.5).astype(np.int64)
    return np.floor(u).astype(np.int64) - 1


def build_stencil_batch(kernel: KernelKind, spec: GridSpec, positions: np.ndarray) -> StencilBatch:
    """Vectorized stencil construction for positions of shape (M, d).

    Raises OutOfDomainError unless every particle keeps at least one support
    radius of clearance from the outer grid boundary, so that the full window
    always indexes valid nodes.
    """
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    d = spec.dimension
    h = spec.spacing
    u = (x - spec.origin) / h
    s = kernel.support_radius
    lo, hi = s, spec.nodes_per_dim - 1 - s
    bad = np.any((u < lo) | (u > hi), axis=1)
    if np.any(bad):
        raise OutOfDomainError(
            f"{int(bad.sum())} particle(s) violate the interior margin of "
            f"{s} grid spacings (first offender: {x[np.argmax(bad)]})"
        )

    n_axis = kernel.axis_nodes
    base = _axis_base(kernel, u)  # (M, d)
    # r = (x_p - x_i)/h for every axis window slot
    r = u[:, None, :] - (base[:, None, :] + np.arange(n_axis)[None, :, None])
    w1 = kernel_eval(kernel, r)  # (M, A, d)
    g1 = kernel_grad(kernel, r) / h

    offsets = np.array(list(itertools.product(range(n_axis), repeat=d)), dtype=np.int64)
    m, n_win = x.shape[0], offsets.shape[0]

    weights = np.ones((m, n_win))
    for j in range(d):
        weights *= w1[:, offsets[:, j], j]

    gradients = np.empty((m, n_win, d))
    for j in range(d):
        gj = g1[:, offsets[:, j], j].copy()
        for l in range(d):
            if l != j:
                gj *= w1[:, offsets[:, l], l]
        gradients[:, :, j] = gj

    node_axis = base[:, None, :] + offsets[None, :, :]  # (M, S, d)
    flat = (node_axis * spec.strides).sum(axis=2)
    node_offsets = -h * np.stack([r[:, offsets[:, j], j] for j in range(d)], axis=2)
    return StencilBatch(flat, weights, gradients, node_offsets)


def build_stencil(kernel: KernelKind, spec: GridSpec, x_p: np.ndarray) -> WeightStencil:
    """Stencil for a single particle, trimmed to the nodes with nonzero weight."""
    batch = build_stencil_batch(kernel, spec, np.asarray(x_p, dtype=float)[None, :])
    keep = batch.weights[0] != 0.0
    multi = spec.unflatten(batch.flat_indices[0, keep])
    return WeightStencil(multi, batch.weights[0, keep], batch.gradients[0, keep])
