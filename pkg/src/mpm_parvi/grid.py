"""Regular Cartesian background grid and per-iteration nodal state.

Node geometry is immutable for the whole run; nodal state (mass, momentum,
velocities, forces) is scratch data rebuilt every iteration. Two storage
backends share one interface: a dense flat array, and a hash-indexed sparse
map for node counts where k^d no longer fits in memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Nodes with aggregated mass at or below this (total particle mass is 1 by
# convention) are inactive: velocity and force updates leave them at zero.
MASS_EPSILON = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a regular grid with k nodes per axis at spacing h."""

    dimension: int
    nodes_per_dim: int
    spacing: float
    origin: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.nodes_per_dim < 4:
            raise ValueError(f"nodes_per_dim must be >= 4, got {self.nodes_per_dim}")
        if not self.spacing > 0.0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.origin.shape != (self.dimension,):
            raise ValueError("origin length must equal dimension")

    @property
    def node_count(self) -> int:
        return self.nodes_per_dim**self.dimension

    @property
    def strides(self) -> np.ndarray:
        """Row-major flat-index strides: last axis varies fastest."""
        k, d = self.nodes_per_dim, self.dimension
        return k ** np.arange(d - 1, -1, -1, dtype=np.int64)

    @property
    def upper_corner(self) -> np.ndarray:
        return self.origin + self.spacing * (self.nodes_per_dim - 1)

    def node_position(self, index) -> np.ndarray:
        """Position of a node multi-index: origin + h * index."""
        idx = np.asarray(index, dtype=np.int64)
        if idx.shape != (self.dimension,):
            raise IndexError(f"multi-index must have length {self.dimension}")
        if np.any(idx < 0) or np.any(idx >= self.nodes_per_dim):
            raise IndexError(f"multi-index {idx} outside [0, {self.nodes_per_dim})")
        return self.origin + self.spacing * idx

    def flat_index(self, index) -> int:
        idx = np.asarray(index, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx >= self.nodes_per_dim):
            raise IndexError(f"multi-index {idx} outside [0, {self.nodes_per_dim})")
        return int((idx * self.strides).sum())

    def unflatten(self, flat) -> np.ndarray:
        """Inverse of flat_index, vectorized: (...,) -> (..., d)."""
        flat = np.asarray(flat, dtype=np.int64)
        if np.any(flat < 0) or np.any(flat >= self.node_count):
            raise IndexError("flat index outside [0, node_count)")
        return (flat[..., None] // self.strides) % self.nodes_per_dim

    def positions_from_flat(self, flat) -> np.ndarray:
        return self.origin + self.spacing * self.unflatten(flat)

    def interior_bounds(self, support_radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box inside which a full support window fits."""
        pad = support_radius * self.spacing
        return self.origin + pad, self.upper_corner - pad


@dataclass
class NodalState:
    """Transient state of a single node; array-of-struct view used in tests
    and small examples, mirroring the vectorized grid backends."""

    mass: float
    momentum: np.ndarray
    velocity: np.ndarray
    force_internal: np.ndarray
    force_external: np.ndarray

    @classmethod
    def zero(cls, dimension: int) -> "NodalState":
        z = lambda: np.zeros(dimension)
        return cls(0.0, z(), z(), z(), z())


def nodal_velocity(state: NodalState, mass_epsilon: float = MASS_EPSILON) -> np.ndarray:
    """momentum / mass on active nodes; zero (inactive) below the mass floor."""
    if state.mass > mass_epsilon:
        return state.momentum / state.mass
    return np.zeros_like(state.momentum)


def apply_momentum_update(
    state: NodalState, dt: float, mass_epsilon: float = MASS_EPSILON
) -> np.ndarray:
    """Explicit Euler: v + dt (f_int + f_ext)/m on active nodes, zero otherwise.

    Forces on massless nodes are dropped by design; there is nothing to move.
    """
    if state.mass > mass_epsilon:
        return state.velocity + dt * (state.force_internal + state.force_external) / state.mass
    return np.zeros_like(state.velocity)


class DenseGrid:
    """Nodal state in flat arrays indexed by row-major node id."""

    def __init__(self, spec: GridSpec, mass_epsilon: float = MASS_EPSILON):
        self.spec = spec
        self.mass_epsilon = mass_epsilon
        n, d = spec.node_count, spec.dimension
        self.mass = np.zeros(n)
        self.momentum = np.zeros((n, d))
        self.velocity = np.zeros((n, d))
        self.velocity_next = np.zeros((n, d))
        self.force_internal = np.zeros((n, d))
        self.force_external = np.zeros((n, d))

    def reset(self) -> None:
        """Zero all nodal state; geometry is untouched."""
        for arr in (self.mass, self.momentum, self.velocity, self.velocity_next,
                    self.force_internal, self.force_external):
            arr.fill(0.0)

    def add_mass_momentum(self, flat, mass, momentum) -> None:
        np.add.at(self.mass, flat, mass)
        np.add.at(self.momentum, flat, momentum)

    def add_internal_force(self, flat, force) -> None:
        np.add.at(self.force_internal, flat, force)

    def add_external_force(self, flat, force) -> None:
        np.add.at(self.force_external, flat, force)

    def compute_velocities(self) -> None:
        active = self.mass > self.mass_epsilon
        self.velocity.fill(0.0)
        self.velocity[active] = self.momentum[active] / self.mass[active, None]

    def update_velocities(self, dt: float) -> None:
        active = self.mass > self.mass_epsilon
        self.velocity_next.fill(0.0)
        force = self.force_internal[active] + self.force_external[active]
        self.velocity_next[active] = self.velocity[active] + dt * force / self.mass[active, None]

    def active_flat_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mass > self.mass_epsilon)

    def mass_at(self, flat) -> np.ndarray:
        return self.mass[flat]

    def velocity_at(self, flat) -> np.ndarray:
        return self.velocity[flat]

    def velocity_next_at(self, flat) -> np.ndarray:
        return self.velocity_next[flat]

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def total_momentum(self) -> np.ndarray:
        return self.momentum.sum(axis=0)


class SparseGrid:
    """Nodal state keyed by flat node id; only touched nodes are stored.

    Produces results identical to DenseGrid: keys are kept sorted, so every
    accumulation and reduction runs in the same deterministic order.
    """

    def __init__(self, spec: GridSpec, mass_epsilon: float = MASS_EPSILON):
        self.spec = spec
        self.mass_epsilon = mass_epsilon
        self._keys = np.empty(0, dtype=np.int64)
        self._alloc(0)

    def _alloc(self, n: int) -> None:
        d = self.spec.dimension
        self.mass = np.zeros(n)
        self.momentum = np.zeros((n, d))
        self.velocity = np.zeros((n, d))
        self.velocity_next = np.zeros((n, d))
        self.force_internal = np.zeros((n, d))
        self.force_external = np.zeros((n, d))

    def reset(self) -> None:
        self._keys = np.empty(0, dtype=np.int64)
        self._alloc(0)

    def _grow(self, flat: np.ndarray) -> None:
        new = np.setdiff1d(flat, self._keys)
        if new.size == 0:
            return
        merged = np.union1d(self._keys, new)
        move = np.searchsorted(merged, self._keys)
        old = (self.mass, self.momentum, self.velocity, self.velocity_next,
               self.force_internal, self.force_external)
        self._keys = merged
        self._alloc(merged.size)
        for dst, src in zip((self.mass, self.momentum, self.velocity, self.velocity_next,
                             self.force_internal, self.force_external), old):
            dst[move] = src

    def _slots(self, flat: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._keys, flat)

    def _gather(self, arr: np.ndarray, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.int64)
        shape = flat.shape
        flat1 = flat.ravel()
        out = np.zeros(shape + arr.shape[1:]) if arr.ndim > 1 else np.zeros(shape)
        out1 = out.reshape((flat1.size,) + arr.shape[1:])
        slots = np.searchsorted(self._keys, flat1)
        ok = slots < self._keys.size
        ok[ok] = self._keys[slots[ok]] == flat1[ok]
        out1[ok] = arr[slots[ok]]
        return out

    def add_mass_momentum(self, flat, mass, momentum) -> None:
        flat = np.asarray(flat, dtype=np.int64)
        self._grow(flat)
        slots = self._slots(flat)
        np.add.at(self.mass, slots, mass)
        np.add.at(self.momentum, slots, momentum)

    def add_internal_force(self, flat, force) -> None:
        flat = np.asarray(flat, dtype=np.int64)
        self._grow(flat)
        np.add.at(self.force_internal, self._slots(flat), force)

    def add_external_force(self, flat, force) -> None:
        flat = np.asarray(flat, dtype=np.int64)
        self._grow(flat)
        np.add.at(self.force_external, self._slots(flat), force)

    def compute_velocities(self) -> None:
        active = self.mass > self.mass_epsilon
        self.velocity.fill(0.0)
        self.velocity[active] = self.momentum[active] / self.mass[active, None]

    def update_velocities(self, dt: float) -> None:
        active = self.mass > self.mass_epsilon
        self.velocity_next.fill(0.0)
        force = self.force_internal[active] + self.force_external[active]
        self.velocity_next[active] = self.velocity[active] + dt * force / self.mass[active, None]

    def active_flat_indices(self) -> np.ndarray:
        return self._keys[self.mass > self.mass_epsilon]

    def mass_at(self, flat) -> np.ndarray:
        return self._gather(self.mass, flat)

    def velocity_at(self, flat) -> np.ndarray:
        return self._gather(self.velocity, flat)

    def velocity_next_at(self, flat) -> np.ndarray:
        return self._gather(self.velocity_next, flat)

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def total_momentum(self) -> np.ndarray:
        d = self.spec.dimension
        return self.momentum.sum(axis=0) if self._keys.size else np.zeros(d)


def make_grid(spec: GridSpec, sparse_node_threshold: int = 1_000_000,
              mass_epsilon: float = MASS_EPSILON):
    """Pick the storage backend: dense up to the node threshold, sparse above."""
    if spec.node_count > sparse_node_threshold:
        return SparseGrid(spec, mass_epsilon)
    return DenseGrid(spec, mass_epsilon)
