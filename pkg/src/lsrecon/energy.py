"""Discretized variational loss on the grid and its exact discrete gradient.

The loss is a sum over grid nodes, each sum scaled by the cell volume h^3::

    total = e_data + a1*e_normal + a2*e_sdf + a3*e_area + a4*e_vol

    e_data   = (h^3 sum delta(phi) d^p) ^ (1/p)
    e_normal = (h^3 sum delta(phi) (1 - |N . grad phi / |grad phi||)^p) ^ (1/p)
    e_sdf    =  h^3 sum (|grad phi| - 1)^2
    e_area   =  h^3 sum delta(phi)
    e_vol    =  h^3 sum H(phi)

``loss_gradient`` is the reverse-mode derivative of exactly these sums,
including the transpose of the finite-difference stencil used for grad phi,
so it agrees with finite differences of ``loss`` to rounding error.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .grid import ScalarField, grad_adjoint_array, grad_array
from .mollifier import delta_eps, delta_eps_prime, heaviside_eps

TERMS = ("data", "normal", "sdf", "area", "vol")

GRAD_GUARD = 1e-8
# smoothing scale of |t| -> sqrt(t^2 + s^2) - s
ABS_SMOOTHING = 1e-6
# inner sums below this make the 1/p term (and its gradient) zero
ROOT_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    alpha1: float = 0.8
    alpha2: float = 1.0
    alpha3: float = 0.1
    alpha4: float = 0.1
    p: float = 2.0
    epsilon: float = 0.15

    def __post_init__(self):
        if not self.p >= 1 or not np.isfinite(self.p):
            raise DomainError(f"p must be a finite value >= 1, got {self.p}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        for name in ("alpha1", "alpha2", "alpha3", "alpha4"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be nonnegative")

    def coefficient(self, term: str) -> float:
        return {
            "data": 1.0,
            "normal": self.alpha1,
            "sdf": self.alpha2,
            "area": self.alpha3,
            "vol": self.alpha4,
        }[term]


@dataclass(frozen=True)
class LossBreakdown:
    e_data: float
    e_normal: float
    e_sdf: float
    e_area: float
    e_vol: float
    total: float

    def as_dict(self) -> dict:
        return asdict(self)


def _root(inner, p):
    """``inner ** (1/p)`` and its derivative, both zero below ``ROOT_FLOOR``."""
    if inner < ROOT_FLOOR:
        return 0.0, 0.0
    value = inner ** (1.0 / p)
    return value, value / (p * inner)


def evaluate(phi: np.ndarray, target, w: LossWeights, terms=TERMS, with_gradient=True):
    """Loss breakdown and (optionally) gradient for a raw ``(nx, ny, nz)`` array.

    Terms not listed in ``terms`` are reported as 0 and contribute nothing.
    """
    spec = target.spec
    h = spec.spacing
    mu = spec.cell_volume
    p = w.p
    eps = w.epsilon
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise DomainError(f"unknown loss terms {sorted(unknown)}")

    G = grad_array(phi, h)
    g = np.sqrt(np.sum(G * G, axis=-1))
    gs = np.maximum(g, GRAD_GUARD)
    dl = delta_eps(phi, eps)

    values = dict.fromkeys(TERMS, 0.0)
    grad = np.zeros_like(phi) if with_gradient else None
    wG = np.zeros_like(G) if with_gradient else None

    if "data" in terms:
        dp = target.d.values**p
        values["data"], droot = _root(mu * np.sum(dl * dp), p)
        if with_gradient and droot:
            grad += droot * mu * delta_eps_prime(phi, eps) * dp

    if "normal" in terms:
        nhat = G / gs[..., None]
        t = np.sum(target.normals * nhat, axis=-1)
        r = np.sqrt(t * t + ABS_SMOOTHING**2)
        q_raw = 1.0 - (r - ABS_SMOOTHING)
        q = np.clip(q_raw, 0.0, 1.0)
        qp = q**p
        values["normal"], droot = _root(mu * np.sum(dl * qp), p)
        if with_gradient and droot and w.alpha1 > 0:
            c = w.alpha1 * droot * mu
            grad += c * delta_eps_prime(phi, eps) * qp
            # d/dt of q^p, zero where the clip is active
            dq_dt = np.where((q_raw > 0.0) & (q_raw < 1.0), -t / r, 0.0)
            coef = c * dl * p * q ** (p - 1.0) * dq_dt
            above = g > GRAD_GUARD
            dt_dG = np.where(
                above[..., None],
                (target.normals - t[..., None] * nhat) / gs[..., None],
                target.normals / GRAD_GUARD,
            )
            wG += coef[..., None] * dt_dG

    if "sdf" in terms:
        values["sdf"] = mu * float(np.sum((g - 1.0) ** 2))
        if with_gradient and w.alpha2 > 0:
            wG += (w.alpha2 * mu * 2.0 * (g - 1.0) / gs)[..., None] * G

    if "area" in terms:
        values["area"] = mu * float(np.sum(dl))
        if with_gradient and w.alpha3 > 0:
            grad += w.alpha3 * mu * delta_eps_prime(phi, eps)

    if "vol" in terms:
        values["vol"] = mu * float(np.sum(heaviside_eps(phi, eps)))
        if with_gradient and w.alpha4 > 0:
            grad += w.alpha4 * mu * dl

    total = sum(w.coefficient(k) * values[k] for k in TERMS)
    breakdown = LossBreakdown(
        e_data=float(values["data"]),
        e_normal=float(values["normal"]),
        e_sdf=float(values["sdf"]),
        e_area=float(values["area"]),
        e_vol=float(values["vol"]),
        total=float(total),
    )
    if with_gradient:
        grad += grad_adjoint_array(wG, h)
    return breakdown, grad


def _check(phi: ScalarField, target):
    if phi.spec != target.spec:
        raise DomainError("field and target live on different grids")
    if not np.all(np.isfinite(phi.values)):
        raise DomainError("field contains NaN or Inf")


def loss(phi: ScalarField, target, w: LossWeights = LossWeights(), terms=TERMS) -> LossBreakdown:
    _check(phi, target)
    return evaluate(phi.values, target, w, terms, with_gradient=False)[0]


def loss_gradient(phi: ScalarField, target, w: LossWeights = LossWeights(), terms=TERMS) -> ScalarField:
    _check(phi, target)
    return ScalarField(phi.spec, evaluate(phi.values, target, w, terms)[1])


CE_CLAMP = 1e-7


def voxel_cross_entropy(p_true, p_hat) -> float:
    """Mean binary cross entropy between an occupancy grid and predicted probabilities."""
    truth = np.asarray(getattr(p_true, "bits", p_true), dtype=np.float64)
    pred = np.asarray(getattr(p_hat, "values", getattr(p_hat, "bits", p_hat)), dtype=np.float64)
    if truth.shape != pred.shape:
        raise DomainError(f"shape mismatch {truth.shape} vs {pred.shape}")
    pred = np.clip(pred, CE_CLAMP, 1.0 - CE_CLAMP)
    return float(-np.mean(truth * np.log(pred) + (1.0 - truth) * np.log(1.0 - pred)))
