"""Small-matrix hyper-elastic constitutive models.

Maps deformation gradients to strain energy densities and stress tensors.
Everything is dimension-generic: a "matrix" is a dense (d, d) float array,
and all routines broadcast over stacked inputs of shape (..., d, d), which
is what the transfer code feeds them (one matrix per particle).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# Deformations with det(F) at or below this are treated as collapsed
# (numerical fracture); callers choose the recovery policy.
DET_FLOOR = 1e-10


class SingularDeformationError(ValueError):
    """det(F) <= DET_FLOOR: log(J) and F^{-T} are undefined or meaningless."""


class ModelKind(enum.Enum):
    NEO_HOOKEAN = "neo_hookean"
    LINEAR_ELASTIC = "linear_elastic"


class StressKind(enum.Enum):
    CAUCHY = "cauchy"
    KIRCHHOFF = "kirchhoff"
    PK1 = "pk1"
    PK2 = "pk2"


@dataclass(frozen=True)
class MaterialParams:
    """Elastic constants. mu and lam are derived from (E, nu), never set freely."""

    youngs_modulus: float
    poissons_ratio: float
    mu: float
    lam: float


def lame_from_elastic(youngs_modulus: float, poissons_ratio: float) -> MaterialParams:
    """Derive the Lame parameters from Young's modulus and Poisson's ratio.

    mu = E / (2(1+nu)),  lam = E nu / ((1+nu)(1-2nu)).

    Raises ValueError outside the physical range E > 0, -1 < nu < 0.5
    (nu = 0.5 is the incompressible limit where lam diverges).
    """
    E, nu = float(youngs_modulus), float(poissons_ratio)
    if E <= 0.0:
        raise ValueError(f"youngs_modulus must be positive, got {E}")
    if not (-1.0 < nu < 0.5):
        raise ValueError(f"poissons_ratio must lie in (-1, 0.5), got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return MaterialParams(E, nu, mu, lam)


@dataclass(frozen=True)
class ConstitutiveModel:
    kind: ModelKind
    params: MaterialParams

    @classmethod
    def neo_hookean(cls, youngs_modulus: float, poissons_ratio: float) -> "ConstitutiveModel":
        return cls(ModelKind.NEO_HOOKEAN, lame_from_elastic(youngs_modulus, poissons_ratio))

    @classmethod
    def linear_elastic(cls, youngs_modulus: float, poissons_ratio: float) -> "ConstitutiveModel":
        return cls(ModelKind.LINEAR_ELASTIC, lame_from_elastic(youngs_modulus, poissons_ratio))


def _checked_det(F: np.ndarray) -> np.ndarray:
    det = np.linalg.det(F)
    if np.any(det <= DET_FLOOR):
        worst = float(np.min(det))
        raise SingularDeformationError(
            f"det(F) = {worst:.3e} is at or below the floor {DET_FLOOR:.0e}"
        )
    return det


def _small_strain(F: np.ndarray) -> np.ndarray:
    # eps = (F + F^T)/2 - I
    d = F.shape[-1]
    return 0.5 * (F + np.swapaxes(F, -1, -2)) - np.eye(d)


def energy_density(model: ConstitutiveModel, F: np.ndarray) -> np.ndarray:
    """Strain energy density Psi(F); zero for an undeformed (rotation) state.

    Neo-Hookean: (mu/2)(tr(F^T F) - d) - mu log J + (lam/2) log^2 J, J = det F.
    Linear elastic: mu tr(eps^2) + (lam/2) tr(eps)^2 with eps = (F+F^T)/2 - I.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    mu, lam = model.params.mu, model.params.lam
    if model.kind is ModelKind.NEO_HOOKEAN:
        log_j = np.log(_checked_det(F))
        tr_c = np.einsum("...ij,...ij->...", F, F)
        return 0.5 * mu * (tr_c - d) - mu * log_j + 0.5 * lam * log_j**2
    eps = _small_strain(F)
    tr_eps = np.einsum("...ii->...", eps)
    return mu * np.einsum("...ij,...ij->...", eps, eps) + 0.5 * lam * tr_eps**2


def first_pk_stress(model: ConstitutiveModel, F: np.ndarray) -> np.ndarray:
    """First Piola-Kirchhoff stress P = dPsi/dF.

    Neo-Hookean: mu (F - F^{-T}) + lam log(J) F^{-T}.
    Linear elastic: lam tr(eps) I + 2 mu eps.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    mu, lam = model.params.mu, model.params.lam
    if model.kind is ModelKind.NEO_HOOKEAN:
        log_j = np.log(_checked_det(F))
        f_inv_t = np.swapaxes(np.linalg.inv(F), -1, -2)
        return mu * (F - f_inv_t) + lam * log_j[..., None, None] * f_inv_t
    eps = _small_strain(F)
    tr_eps = np.einsum("...ii->...", eps)
    return lam * tr_eps[..., None, None] * np.eye(d) + 2.0 * mu * eps


def cauchy_stress(model: ConstitutiveModel, F: np.ndarray) -> np.ndarray:
    """Cauchy stress sigma = (1/J) P F^T.

    For Neo-Hookean the algebraically equivalent symmetric closed form
    (1/J)(mu (F F^T - I) + lam log(J) I) is used.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    mu, lam = model.params.mu, model.params.lam
    det = _checked_det(F)
    if model.kind is ModelKind.NEO_HOOKEAN:
        log_j = np.log(det)
        b = F @ np.swapaxes(F, -1, -2)
        return (mu * (b - np.eye(d)) + lam * log_j[..., None, None] * np.eye(d)) / det[..., None, None]
    p = first_pk_stress(model, F)
    return (p @ np.swapaxes(F, -1, -2)) / det[..., None, None]


def linear_elastic_stress(params: MaterialParams, eps: np.ndarray) -> np.ndarray:
    """Isotropic linear-elastic stress sigma = lam tr(eps) I + 2 mu eps.

    eps must be a (symmetric) small-strain tensor.
    """
    eps = np.asarray(eps, dtype=float)
    d = eps.shape[-1]
    tr_eps = np.einsum("...ii->...", eps)
    return params.lam * tr_eps[..., None, None] * np.eye(d) + 2.0 * params.mu * eps


# stress_convert: one entry per (from, to) pair. Each function receives
# (stress, F, J, F^{-1}) and may ignore what it does not need.
def _t(a):
    return np.swapaxes(a, -1, -2)


_CONVERSIONS = {
    (StressKind.CAUCHY, StressKind.KIRCHHOFF): lambda s, F, J, Fi: J[..., None, None] * s,
    (StressKind.CAUCHY, StressKind.PK1): lambda s, F, J, Fi: J[..., None, None] * s @ _t(Fi),
    (StressKind.CAUCHY, StressKind.PK2): lambda s, F, J, Fi: J[..., None, None] * Fi @ s @ _t(Fi),
    (StressKind.KIRCHHOFF, StressKind.CAUCHY): lambda s, F, J, Fi: s / J[..., None, None],
    (StressKind.KIRCHHOFF, StressKind.PK1): lambda s, F, J, Fi: s @ _t(Fi),
    (StressKind.KIRCHHOFF, StressKind.PK2): lambda s, F, J, Fi: Fi @ s @ _t(Fi),
    (StressKind.PK1, StressKind.CAUCHY): lambda s, F, J, Fi: s @ _t(F) / J[..., None, None],
    (StressKind.PK1, StressKind.KIRCHHOFF): lambda s, F, J, Fi: s @ _t(F),
    (StressKind.PK1, StressKind.PK2): lambda s, F, J, Fi: Fi @ s,
    (StressKind.PK2, StressKind.CAUCHY): lambda s, F, J, Fi: F @ s @ _t(F) / J[..., None, None],
    (StressKind.PK2, StressKind.KIRCHHOFF): lambda s, F, J, Fi: F @ s @ _t(F),
    (StressKind.PK2, StressKind.PK1): lambda s, F, J, Fi: F @ s,
}


def stress_convert(
    kind_from: StressKind,
    kind_to: StressKind,
    stress: np.ndarray,
    F: np.ndarray,
) -> np.ndarray:
    """Convert between Cauchy, Kirchhoff, PK1, and PK2 stress measures."""
    stress = np.asarray(stress, dtype=float)
    F = np.asarray(F, dtype=float)
    if kind_from is kind_to:
        return stress.copy()
    det = _checked_det(F)
    f_inv = np.linalg.inv(F)
    return _CONVERSIONS[(kind_from, kind_to)](stress, F, det, f_inv)
