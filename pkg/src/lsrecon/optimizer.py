"""Fit a level-set field to an oriented point cloud by momentum descent."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from .distance import DistanceField, OrientedPointCloud, Sphere, build_distance_field
from .energy import LossBreakdown, LossWeights, evaluate
from .errors import DomainError, FitDiverged
from .grid import GridSpec, ScalarField

log = logging.getLogger(__name__)

MARGIN_CELLS = 3
DIVERGENCE_FACTOR = 1e3
STALL_WINDOW = 10
# The largest Hessian eigenvalue of the unit-gradient term is about 8.7/h^2
# (one-sided boundary stencils), so heavy ball with momentum 0.9 is stable
# only below roughly 0.44 h^2. The 1/p roots of the data and normal terms
# behave like |x| near their minimum and chatter at large steps as well.
DEFAULT_STEP_FACTOR = 0.05


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 2000
    step_size: float | None = None  # None -> DEFAULT_STEP_FACTOR * h^2
    momentum: float = 0.9
    stop_tol: float = 1e-4
    weights: LossWeights = field(default_factory=LossWeights)
    init: float | str | PathLike | ScalarField = 0.6
    log_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.step_size is not None and not self.step_size >= 0:
            raise DomainError("step_size must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError("momentum must lie in [0, 1)")
        if not self.stop_tol > 0:
            raise DomainError("stop_tol must be positive")
        if self.log_every < 1:
            raise DomainError("log_every must be >= 1")

    def resolved_step(self, spec: GridSpec) -> float:
        return DEFAULT_STEP_FACTOR * spec.spacing**2 if self.step_size is None else float(self.step_size)


@dataclass
class FitReport:
    iterations: int = 0
    history: list[tuple[int, LossBreakdown]] = field(default_factory=list)
    wall_time: float = 0.0
    field: ScalarField | None = None
    stop_reason: str = ""

    @property
    def initial(self) -> LossBreakdown:
        return self.history[0][1]

    @property
    def final(self) -> LossBreakdown:
        return self.history[-1][1]


def init_phi(spec: GridSpec, init=0.6) -> ScalarField:
    """Starting field: a sphere SDF about the domain centre, or a given/loaded field."""
    if isinstance(init, ScalarField):
        if init.spec != spec:
            raise DomainError("initial field grid does not match the fitting grid")
        return init
    if isinstance(init, (str, PathLike)):
        from .io import read_field

        return init_phi(spec, read_field(init))
    radius = float(init)
    center = 0.5 * (spec.lower + spec.upper)
    room = float(np.min(np.minimum(center - spec.lower, spec.upper - center)))
    if not 0 < radius <= room - MARGIN_CELLS * spec.spacing:
        raise DomainError(f"initial radius {radius} leaves less than {MARGIN_CELLS} cells of margin")
    return ScalarField(spec, radius - np.linalg.norm(spec.points() - center, axis=-1))


def check_margin(cloud: OrientedPointCloud, spec: GridSpec):
    margin = MARGIN_CELLS * spec.spacing
    if np.any(cloud.points.min(axis=0) < spec.lower + margin) or np.any(
        cloud.points.max(axis=0) > spec.upper - margin
    ):
        raise DomainError(f"target must stay {MARGIN_CELLS} cells away from the grid boundary")


def fit(target: OrientedPointCloud | DistanceField, spec: GridSpec, cfg: FitConfig = FitConfig(), callback=None):
    """Heavy-ball descent on the loss; returns ``(field, report)``.

    The update uses the gradient divided by the cell volume, i.e. the
    L2 gradient of the continuum energy, so ``step_size`` is in units
    of the stencil stability limit ``h^2``.
    """
    if isinstance(target, DistanceField):
        if target.spec != spec:
            raise DomainError("target distance field grid does not match")
        dist = target
    else:
        check_margin(target, spec)
        dist = build_distance_field(target, spec)

    w = cfg.weights
    step = cfg.resolved_step(spec)
    scale = step / spec.cell_volume
    phi = np.array(init_phi(spec, cfg.init).values)
    velocity = np.zeros_like(phi)
    report = FitReport()
    start = time.perf_counter()

    initial = None
    last_good = phi.copy()
    it = 0
    while True:
        breakdown, grad = evaluate(phi, dist, w)
        if initial is None:
            initial = breakdown.total
        if not (math.isfinite(breakdown.total) and np.all(np.isfinite(grad))) or (
            breakdown.total > DIVERGENCE_FACTOR * max(abs(initial), 1e-300)
        ):
            report.iterations = it
            report.wall_time = time.perf_counter() - start
            report.field = ScalarField(spec, last_good)
            report.stop_reason = "diverged"
            raise FitDiverged(
                f"loss diverged at iteration {it} (total={breakdown.total!r}, initial={initial!r})",
                report.field,
                report,
            )
        last_good = phi.copy()

        logged = it % cfg.log_every == 0 or it == cfg.max_iters
        if logged:
            report.history.append((it, breakdown))
            if callback is not None:
                callback(it, breakdown)
            log.debug("iter %d total %.6e", it, breakdown.total)
        if it == cfg.max_iters:
            report.stop_reason = "max_iters"
            break
        if logged and len(report.history) > STALL_WINDOW:
            old = report.history[-STALL_WINDOW - 1][1].total
            new = report.history[-1][1].total
            if (old - new) / max(abs(old), 1e-300) < cfg.stop_tol:
                report.stop_reason = "stalled"
                break

        velocity = cfg.momentum * velocity - scale * grad
        phi = phi + velocity
        it += 1

    report.iterations = it
    report.wall_time = time.perf_counter() - start
    report.field = ScalarField(spec, phi)
    return report.field, report
