"""Finite-difference verification of ``loss_gradient``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distance import Sphere, build_distance_field, sample_shape_surface
from .energy import TERMS, LossWeights, evaluate
from .grid import GridSpec, ScalarField

REL_TOL = 1e-4
ABS_TOL = 1e-3
# below this gradient magnitude the absolute error is judged instead
TINY = 1e-6


def random_smooth_field(spec: GridSpec, rng: np.random.Generator, modes: int = 4) -> ScalarField:
    """A perturbed sphere SDF scaled so a good share of nodes sit in the mollifier band."""
    pts = spec.points()
    values = 0.5 - np.linalg.norm(pts, axis=-1)
    for _ in range(modes):
        k = 2.0 * rng.standard_normal(3)
        values = values + 0.05 * np.sin(pts @ k + rng.uniform(0.0, 2 * np.pi))
    return ScalarField(spec, 0.6 * values)


@dataclass
class TermResult:
    term: str
    max_rel: float = 0.0
    max_abs: float = 0.0
    worst_node: tuple = ()
    worst_analytic: float = 0.0
    worst_numeric: float = 0.0

    def passed(self, rel_tol=REL_TOL, abs_tol=ABS_TOL) -> bool:
        return self.max_rel <= rel_tol and self.max_abs <= abs_tol


@dataclass
class GradCheckReport:
    results: list[TermResult] = field(default_factory=list)
    nodes: list[tuple] = field(default_factory=list)

    def passed(self, rel_tol=REL_TOL, abs_tol=ABS_TOL) -> bool:
        return all(r.passed(rel_tol, abs_tol) for r in self.results)


def check_terms(phi: ScalarField, target, w: LossWeights, nodes, terms_list, step=None, sabotage=False):
    """Compare the analytic gradient with central differences at ``nodes``.

    ``terms_list`` holds ``(label, terms)`` pairs. With ``sabotage`` the
    analytic gradient is deliberately corrupted at the first node.
    """
    values = np.array(phi.values)
    if step is None:
        step = 1e-5 * float(np.max(np.abs(values)))
    report = GradCheckReport(nodes=[tuple(int(i) for i in n) for n in nodes])
    for label, terms in terms_list:
        _, grad = evaluate(values, target, w, terms)
        if sabotage:
            grad[report.nodes[0]] = 1.5 * grad[report.nodes[0]] + 1e-3
        res = TermResult(label)
        worst = -1.0
        for node in report.nodes:
            old = values[node]
            values[node] = old + step
            up = evaluate(values, target, w, terms, with_gradient=False)[0].total
            values[node] = old - step
            down = evaluate(values, target, w, terms, with_gradient=False)[0].total
            values[node] = old
            numeric = (up - down) / (2.0 * step)
            analytic = float(grad[node])
            scale = max(abs(numeric), abs(analytic))
            if scale >= TINY:
                err = abs(numeric - analytic) / scale
                res.max_rel = max(res.max_rel, err)
                badness = err / REL_TOL
            else:
                err = abs(numeric - analytic)
                res.max_abs = max(res.max_abs, err)
                badness = err / ABS_TOL
            if badness > worst:
                worst = badness
                res.worst_node, res.worst_analytic, res.worst_numeric = node, analytic, numeric
        report.results.append(res)
    return report


def default_terms(w: LossWeights):
    """Each active term alone, then the combined loss."""
    active = [t for t in TERMS if w.coefficient(t) > 0]
    return [(t, (t,)) for t in active] + [("combined", TERMS)]


def run_gradcheck(res=12, seed=0, w: LossWeights = LossWeights(), n_nodes=50, sabotage=False, cloud_size=500):
    spec = GridSpec.cube(res)
    rng = np.random.default_rng(seed)
    phi = random_smooth_field(spec, rng)
    cloud = sample_shape_surface(Sphere(radius=0.5), cloud_size, seed)
    target = build_distance_field(cloud, spec)
    flat = rng.choice(spec.size, size=min(n_nodes, spec.size), replace=False)
    nodes = np.stack(np.unravel_index(flat, spec.dims), axis=1)
    return check_terms(phi, target, w, nodes, default_terms(w), sabotage=sabotage)
