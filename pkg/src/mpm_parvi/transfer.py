"""Particle <-> grid state transfer.

P2G scatters mass and momentum onto the grid (plain or affine-augmented),
nodal internal forces are assembled from per-particle stress, and G2P pulls
updated nodal velocities back to advance particle velocity, position, affine
tensor, and deformation gradient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .constitutive import DET_FLOOR, ConstitutiveModel, cauchy_stress, first_pk_stress
from .grid import GridSpec
from .interpolation import KernelKind, StencilBatch, build_stencil_batch

# Closed-form node-spread diagonal D_p = c * h^2 * I for B-spline windows.
_DP_DIAGONAL = {KernelKind.QUADRATIC: 0.25, KernelKind.CUBIC: 1.0 / 3.0}


class SingularDpError(ValueError):
    """The node-spread matrix D_p is not invertible (degenerate stencil)."""


class SchemeKind(enum.Enum):
    PIC = "pic"
    APIC = "apic"
    FLIP_BLEND = "flip_blend"


@dataclass(frozen=True)
class TransferScheme:
    """G2P update flavor. flip_alpha blends PIC (0) toward FLIP (1) and is
    only consulted by FLIP_BLEND; it is unrelated to the score amplification
    constant score_alpha."""

    kind: SchemeKind
    flip_alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.flip_alpha <= 1.0:
            raise ValueError(f"flip_alpha must lie in [0, 1], got {self.flip_alpha}")


@dataclass
class Particles:
    """Particle state in struct-of-arrays layout (one row per particle)."""

    positions: np.ndarray  # (M, d)
    velocities: np.ndarray  # (M, d)
    masses: np.ndarray  # (M,), constant for the whole run
    volumes0: np.ndarray  # (M,), initial volumes, constant
    F: np.ndarray  # (M, d, d) deformation gradients
    B: np.ndarray  # (M, d, d) affine tensors (APIC only)
    stencil: StencilBatch | None = None  # per-iteration cache
    f_reset_count: int = 0  # deformation gradients reset after near-collapse

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def at_rest(cls, positions: np.ndarray, total_mass: float = 1.0,
                volume0: float | None = None) -> "Particles":
        """Particles at the given positions with zero velocity, F = I, B = 0.

        Default per-particle volume is the bounding-box volume of the cloud
        divided by the particle count.
        """
        x = np.atleast_2d(np.asarray(positions, dtype=float)).copy()
        m, d = x.shape
        if volume0 is None:
            extent = np.ptp(x, axis=0)
            volume0 = float(np.prod(extent)) / m
        return cls(
            positions=x,
            velocities=np.zeros((m, d)),
            masses=np.full(m, total_mass / m),
            volumes0=np.full(m, volume0),
            F=np.tile(np.eye(d), (m, 1, 1)),
            B=np.zeros((m, d, d)),
        )

    def kinetic_energy(self) -> float:
        return float(0.5 * np.sum(self.masses * np.einsum("md,md->m", self.velocities, self.velocities)))


def _require_stencil(particles: Particles) -> StencilBatch:
    if particles.stencil is None:
        raise ValueError("stencils not built for the current particle positions")
    return particles.stencil


def p2g_pic(particles: Particles, grid) -> None:
    """Scatter particle mass and momentum onto the (freshly reset) grid."""
    st = _require_stencil(particles)
    wm = st.weights * particles.masses[:, None]  # (M, S)
    mom = wm[:, :, None] * particles.velocities[:, None, :]  # (M, S, d)
    d = particles.dimension
    grid.add_mass_momentum(st.flat_indices.ravel(), wm.ravel(), mom.reshape(-1, d))


def compute_dp(particle_position: np.ndarray, kernel: KernelKind, spec: GridSpec) -> np.ndarray:
    """Node-spread matrix D_p = sum_i w_ip (x_i - x_p)(x_i - x_p)^T.

    For quadratic and cubic windows this equals h^2/4 * I and h^2/3 * I at any
    interior position; the sum form exists to verify that and to serve the
    linear kernel, where D_p varies with position and may be singular.
    """
    st = build_stencil_batch(kernel, spec, np.asarray(particle_position, dtype=float)[None, :])
    return np.einsum("s,sa,sb->ab", st.weights[0], st.node_offsets[0], st.node_offsets[0])


def _affine_velocity_matrix(particles: Particles, kernel: KernelKind, spec: GridSpec) -> np.ndarray:
    """C_p = B_p D_p^{-1}, cached per particle before the node loop."""
    if kernel in _DP_DIAGONAL:
        inv_diag = 1.0 / (_DP_DIAGONAL[kernel] * spec.spacing**2)
        return particles.B * inv_diag
    st = _require_stencil(particles)
    dp = np.einsum("ms,msa,msb->mab", st.weights, st.node_offsets, st.node_offsets)
    det = np.linalg.det(dp)
    if np.any(np.abs(det) <= 1e-300):
        raise SingularDpError(
            "node-spread matrix is singular for at least one particle "
            "(linear kernel with a degenerate stencil)"
        )
    return particles.B @ np.linalg.inv(dp)


def p2g_apic(particles: Particles, grid, kernel: KernelKind) -> None:
    """Affine-augmented P2G: momentum carries v_p + B_p D_p^{-1} (x_i - x_p)."""
    st = _require_stencil(particles)
    c = _affine_velocity_matrix(particles, kernel, grid.spec)
    v_at_node = particles.velocities[:, None, :] + np.einsum("mab,msb->msa", c, st.node_offsets)
    wm = st.weights * particles.masses[:, None]
    mom = wm[:, :, None] * v_at_node
    d = particles.dimension
    grid.add_mass_momentum(st.flat_indices.ravel(), wm.ravel(), mom.reshape(-1, d))


def assemble_internal_forces(particles: Particles, grid, model: ConstitutiveModel,
                             route: str = "energy") -> None:
    """Accumulate f_i^int = -sum_p V_p^0 [dPsi/dF](F_p) F_p^T grad(w_ip).

    route="energy" computes the stress factor as P(F_p) F_p^T with reference
    volumes; route="cauchy" uses current volumes det(F_p) V_p^0 with the Cauchy
    stress, which is algebraically the same force and exists as a cross-check.
    """
    st = _require_stencil(particles)
    ft = np.swapaxes(particles.F, -1, -2)
    if route == "energy":
        stress_v = particles.volumes0[:, None, None] * (first_pk_stress(model, particles.F) @ ft)
    elif route == "cauchy":
        vol_n = np.linalg.det(particles.F) * particles.volumes0
        stress_v = vol_n[:, None, None] * cauchy_stress(model, particles.F)
    else:
        raise ValueError(f"unknown force route {route!r}")
    contrib = -np.einsum("mab,msb->msa", stress_v, st.gradients)
    d = particles.dimension
    grid.add_internal_force(st.flat_indices.ravel(), contrib.reshape(-1, d))


def g2p(particles: Particles, grid, scheme: TransferScheme, dt: float) -> None:
    """Pull updated nodal velocities back to the particles.

    Updates velocity (per scheme), position (always advanced with the grid
    velocity interpolant), the affine tensor (APIC only), and the deformation
    gradient. A deformation gradient whose update would collapse (det at or
    below the floor) is reset to identity and counted.
    """
    st = _require_stencil(particles)
    d = particles.dimension
    v_next = grid.velocity_next_at(st.flat_indices)  # (M, S, d)
    v_interp = np.einsum("ms,msd->md", st.weights, v_next)

    if scheme.kind is SchemeKind.FLIP_BLEND and scheme.flip_alpha > 0.0:
        v_old = grid.velocity_at(st.flat_indices)
        delta = np.einsum("ms,msd->md", st.weights, v_next - v_old)
        a = scheme.flip_alpha
        new_velocity = (1.0 - a) * v_interp + a * (particles.velocities + delta)
    else:
        # PIC, APIC, and the blend at alpha = 0 share the plain interpolant.
        new_velocity = v_interp

    grad_v = np.einsum("msa,msb->mab", v_next, st.gradients)
    f_new = (np.eye(d) + dt * grad_v) @ particles.F
    collapsed = np.linalg.det(f_new) <= DET_FLOOR
    if np.any(collapsed):
        f_new[collapsed] = np.eye(d)
        particles.f_reset_count += int(collapsed.sum())

    if scheme.kind is SchemeKind.APIC:
        particles.B = np.einsum("ms,msa,msb->mab", st.weights, v_next, st.node_offsets)

    particles.positions = particles.positions + dt * v_interp
    particles.velocities = new_velocity
    particles.F = f_new
