"""Potential wells: the Sobolev constant and well depth, the sets W and Z on
bounded domains, the set K on whole-space surrogates, and monitoring of their
invariance along a run.

Classification is done for g = 1. A field u with coupling g > 0 is mapped to
v = g^(1/(2 sigma)) u, which turns E and I into g^(1/sigma) E[u] and
g^(1/sigma) I[u] evaluated with g = 1; the stored energies, Nehari values and
products are those of v.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Protocol, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .errors import NotConverged, PreconditionError, RegimeError
from .flow import DiagnosticsRecord, RunResult
from .functionals import (
    FlowParams,
    criticality,
    energy,
    energy_critical_sigma,
    lp_norm,
    mass_critical_sigma,
    mass_norm,
    nehari,
)
from .grid import DomainSpec, Field, Grid, build_grid, first_eigenpair, gradient_sq_norm, integrate
from .stationary import GroundState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SobolevConfig:
    tau: float = 1.0
    tol: float = 1e-9
    max_iter: int = 20000
    extrapolate: bool = True
    certify_tol: float = 1e-6  # largest gap between the two extrapolations

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise PreconditionError('sobolev tau must be > 0')
        if not self.tol > 0:
            raise PreconditionError('sobolev tol must be > 0')
        if self.max_iter < 1:
            raise PreconditionError('sobolev max_iter must be >= 1')
        if not self.certify_tol > 0:
            raise PreconditionError('sobolev certify_tol must be > 0')


@dataclass(frozen=True)
class WellConstants:
    lam: float  # discrete Sobolev constant on the grid it was minimized on
    p: float
    domain: DomainSpec
    sigma: float
    grid_n: int
    residual: float
    iterations: int
    lam_refined: Optional[float] = None
    lam_extrapolated: Optional[float] = None
    refinement_gap: Optional[float] = None
    certified: Optional[bool] = None


def well_depth(lam: float, sigma: float) -> float:
    return sigma / (2.0 * sigma + 2.0) * lam ** ((2.0 * sigma + 2.0) / sigma)


def sobolev_quotient(u: Field, sigma: float) -> float:
    """|grad u|_2 / |u|_{2 sigma + 2}."""
    return math.sqrt(gradient_sq_norm(u)) / lp_norm(u, 2.0 * sigma + 2.0)


def _minimize_quotient(grid: Grid, sigma: float, numerics: SobolevConfig) -> Tuple[float, float, int]:
    q = 2.0 * sigma + 2.0
    w = grid.volume_weights
    banded = grid.implicit_banded(numerics.tau)
    u = first_eigenpair(grid)[1].values
    u = u / lp_norm(Field(grid, u), q)
    residual = math.inf
    for it in range(1, numerics.max_iter + 1):
        c = grid.dirichlet_form(u)
        force = np.abs(u) ** (q - 2.0) * u
        el = -grid.stiffness_apply(u) / w + c * force
        residual = math.sqrt(integrate(grid, el * el)) / c
        if residual < numerics.tol:
            return math.sqrt(c), residual, it
        v = solve_banded((1, 1), banded, w * (u + numerics.tau * c * force))
        u = v / float(integrate(grid, np.abs(v) ** q) ** (1.0 / q))
    raise NotConverged(
        f'Sobolev quotient minimization did not converge in {numerics.max_iter} iterations '
        f'(residual {residual:.3e})'
    )


def sobolev_constant(grid: Grid, sigma: float, numerics: SobolevConfig = SobolevConfig()) -> WellConstants:
    """Minimize |grad u| / |u|_{2s+2} on the grid by normalized semi-implicit descent.

    Iterates u <- (W + tau A)^-1 W (u + tau c |u|^(q-2) u), c = |grad u|^2,
    renormalized to |u|_q = 1, from the first eigenfunction.

    With ``extrapolate`` the minimization is repeated on two grids with
    halved and quartered spacing. Each consecutive pair is combined as
    (4 fine - coarse) / 3; the finer combination is ``lam_extrapolated`` and
    the value is ``certified`` when the two combinations agree to
    ``certify_tol``.
    """
    domain = grid.domain
    if domain.whole_space:
        raise PreconditionError('the Sobolev constant is defined here for bounded domains only')
    if not 0 < sigma < energy_critical_sigma(domain.dimension):
        raise RegimeError(f'sigma = {sigma:g} is outside 0 < sigma < 2/(d-2)+ for d = {domain.dimension}')
    lam, residual, iterations = _minimize_quotient(grid, sigma, numerics)
    refined: Optional[float] = None
    extrapolated: Optional[float] = None
    gap: Optional[float] = None
    certified: Optional[bool] = None
    if numerics.extrapolate:
        values = [lam]
        n = grid.n
        for _ in range(2):
            n = 2 * n if domain.radial else 2 * n + 1
            values.append(_minimize_quotient(build_grid(domain, n), sigma, numerics)[0])
        coarse, refined, finest = values
        first = (4.0 * refined - coarse) / 3.0
        extrapolated = (4.0 * finest - refined) / 3.0
        gap = abs(extrapolated - first)
        certified = gap <= numerics.certify_tol
        if not certified:
            logger.warning(
                'Sobolev constant not certified: extrapolations %.12g and %.12g differ by %.3e (certify_tol %.1e)',
                first,
                extrapolated,
                gap,
                numerics.certify_tol,
            )
    logger.info('Sobolev constant: %.12g after %d iterations (extrapolated %s)', lam, iterations, extrapolated)
    return WellConstants(
        lam=lam,
        p=well_depth(lam, sigma),
        domain=domain,
        sigma=sigma,
        grid_n=grid.n,
        residual=residual,
        iterations=iterations,
        lam_refined=refined,
        lam_extrapolated=extrapolated,
        refinement_gap=gap,
        certified=certified,
    )


class WellLabel(str, Enum):
    W = 'W'
    Z = 'Z'
    BOUNDARY = 'Boundary'
    OUTSIDE = 'Outside'


@dataclass(frozen=True)
class WellClassification:
    label: WellLabel
    energy: float
    nehari: float
    margin: float
    grad_l2: float
    small_gradient: bool  # |grad v| < sqrt(2 p), sufficient for membership in W


def _rescale(g: float, sigma: float) -> float:
    """Factor g^(1/sigma) by which E, I and |grad u|^2 change under v = g^(1/(2 sigma)) u."""
    return g ** (1.0 / sigma)


def _well_label(e: float, i: float, p: float, tol: float) -> Tuple[WellLabel, float]:
    margin = min(abs(e - p), abs(i))
    band = tol * (1.0 + abs(e))
    if abs(i) < band or abs(e - p) < band:
        return WellLabel.BOUNDARY, margin
    if e < p and i > 0:
        return WellLabel.W, margin
    if e < p and i < 0:
        return WellLabel.Z, margin
    return WellLabel.OUTSIDE, margin


def _bounded_problem(domain: DomainSpec, params: FlowParams, wc: WellConstants) -> Optional[str]:
    if domain.whole_space:
        return 'the potential well is empty on the whole space (p = 0)'
    if not params.g > 0:
        return 'the potential well needs g > 0'
    if domain != wc.domain or not math.isclose(params.sigma, wc.sigma):
        return 'well constants were computed for another domain or sigma'
    return None


def classify_bounded(
    u: Field, params: FlowParams, wc: WellConstants, tol: float = 1e-8
) -> WellClassification:
    if not params.g > 0:
        raise RegimeError('the potential well needs g > 0')
    problem = _bounded_problem(u.grid.domain, params, wc)
    if problem is not None:
        raise PreconditionError(problem)
    if not np.any(u.values):
        return WellClassification(WellLabel.W, 0.0, 0.0, wc.p, 0.0, True)
    scale = _rescale(params.g, params.sigma)
    grad2 = scale * gradient_sq_norm(u)
    small = math.sqrt(grad2) < math.sqrt(2.0 * wc.p)
    e = scale * energy(u, params)
    i = scale * nehari(u, params)
    label, margin = _well_label(e, i, wc.p, tol)
    return WellClassification(label, e, i, margin, math.sqrt(grad2), small)


@dataclass(frozen=True)
class KClassification:
    member: bool
    energy_product: float
    grad_product: float
    energy_threshold: float
    grad_threshold: float
    alpha: float


@dataclass(frozen=True)
class KThresholds:
    alpha: float
    energy: float  # E[Q] |Q|^(2 alpha)
    grad: float  # |grad Q|^2 |Q|^(2 alpha)


def _check_k_regime(params: FlowParams) -> float:
    d, s = params.d, params.sigma
    if not params.g > 0:
        raise RegimeError('the set K needs g > 0')
    if not mass_critical_sigma(d) < s < energy_critical_sigma(d):
        raise RegimeError(f'sigma = {s:g} is outside 2/d < sigma < 2/(d-2)+ for d = {d}')
    alpha = criticality(params).alpha
    assert alpha is not None
    return alpha


def k_thresholds(qref: GroundState) -> KThresholds:
    params = qref.params
    alpha = _check_k_regime(params)
    Q = qref.profile
    e, grad = _k_products(energy(Q, params), gradient_sq_norm(Q), mass_norm(Q), params, alpha)
    return KThresholds(alpha=alpha, energy=e, grad=grad)


def _k_products(e: float, grad2: float, mass: float, params: FlowParams, alpha: float) -> Tuple[float, float]:
    """E[v] |v|^(2 alpha) and |grad v|^2 |v|^(2 alpha) with |v|^2 = g^(1/sigma) |u|^2."""
    scale = _rescale(params.g, params.sigma)
    mass_pow = (scale * mass * mass) ** alpha
    return scale * e * mass_pow, scale * grad2 * mass_pow


def classify_whole_space(u: Field, params: FlowParams, qref: GroundState) -> KClassification:
    alpha = _check_k_regime(params)
    if not u.grid.domain.whole_space:
        raise PreconditionError('the set K is defined on whole-space surrogates only')
    if not math.isclose(params.sigma, qref.params.sigma) or params.d != qref.params.d:
        raise PreconditionError('reference ground state was computed for another sigma or dimension')
    th = k_thresholds(qref)
    ep, gp = _k_products(energy(u, params), gradient_sq_norm(u), mass_norm(u), params, alpha)
    return KClassification(ep < th.energy and gp < th.grad, ep, gp, th.energy, th.grad, alpha)


def k_barrier(x: float, params: FlowParams, c_gn: float) -> float:
    """f(x) = x^2/2 - C_GN/(2 sigma + 2) x^(d sigma)."""
    if not params.d * params.sigma > 2:
        raise RegimeError('the K barrier needs d sigma > 2')
    if x < 0:
        raise PreconditionError('k_barrier is defined for x >= 0')
    return 0.5 * x * x - c_gn / params.power * x ** (params.d * params.sigma)


def k_barrier_peak(params: FlowParams, c_gn: float) -> float:
    """x1 = ((2 sigma + 2) / (d sigma C_GN))^(1/(d sigma - 2)), the local maximum of f."""
    ds = params.d * params.sigma
    if not ds > 2:
        raise RegimeError('the K barrier needs d sigma > 2')
    if not c_gn > 0:
        raise PreconditionError('C_GN must be > 0')
    return float((params.power / (ds * c_gn)) ** (1.0 / (ds - 2.0)))


@dataclass(frozen=True)
class SnapshotVerdict:
    label: str
    inside: bool  # in the invariant set the run started from
    bound_ok: bool


class SnapshotClassifier(Protocol):
    def not_applicable(self, domain: DomainSpec, params: FlowParams) -> Optional[str]: ...

    def verdict(self, rec: DiagnosticsRecord, params: FlowParams) -> SnapshotVerdict: ...


class BoundedWellClassifier:
    """Labels snapshots W / Z / Boundary / Outside from their recorded E and I.

    While in W it also checks sigma/(2 sigma + 2) |grad v|^2 <= E[v] < p.
    """

    def __init__(self, wc: WellConstants, tol: float = 1e-8):
        self.wc = wc
        self.tol = tol

    def not_applicable(self, domain: DomainSpec, params: FlowParams) -> Optional[str]:
        return _bounded_problem(domain, params, self.wc)

    def verdict(self, rec: DiagnosticsRecord, params: FlowParams) -> SnapshotVerdict:
        scale = _rescale(params.g, params.sigma)
        e, i, grad2 = scale * rec.energy, scale * rec.nehari, scale * rec.grad_l2**2
        label, _ = _well_label(e, i, self.wc.p, self.tol)
        slack = self.tol * (1.0 + abs(e))
        bound_ok = True
        if label is WellLabel.W:
            s = params.sigma
            bound_ok = s / (2.0 * s + 2.0) * grad2 <= e + slack and e < self.wc.p
        return SnapshotVerdict(label.value, label is WellLabel.W, bound_ok)


class WholeSpaceClassifier:
    """K membership of snapshots.

    The H1 bound carried by K is its second defining inequality, so a member
    satisfies it by construction and ``bound_ok`` is always true here.
    """

    def __init__(self, qref: GroundState):
        self.qref = qref

    def not_applicable(self, domain: DomainSpec, params: FlowParams) -> Optional[str]:
        if not domain.whole_space:
            return 'the set K is defined on whole-space surrogates only'
        try:
            _check_k_regime(params)
        except RegimeError as exc:
            return str(exc)
        if not math.isclose(params.sigma, self.qref.params.sigma) or params.d != self.qref.params.d:
            return 'reference ground state was computed for another sigma or dimension'
        return None

    def verdict(self, rec: DiagnosticsRecord, params: FlowParams) -> SnapshotVerdict:
        th = k_thresholds(self.qref)
        ep, gp = _k_products(rec.energy, rec.grad_l2**2, rec.mass, params, th.alpha)
        member = ep < th.energy and gp < th.grad
        return SnapshotVerdict('K' if member else 'not-K', member, True)


class InvarianceStatus(str, Enum):
    INVARIANT = 'Invariant'
    VIOLATED = 'Violated'
    NOT_APPLICABLE = 'NotApplicable'


@dataclass(frozen=True)
class InvarianceReport:
    status: InvarianceStatus
    reason: str
    labels: Tuple[str, ...]
    violations: int
    first_violation_t: Optional[float]
    bound_violations: int


def monitor_invariance(run: RunResult, classifier: SnapshotClassifier) -> InvarianceReport:
    """Classify every recorded snapshot and report departures from the starting set.

    A run starting in W must stay out of Z and Outside, one starting in Z must
    not enter W, and one starting in K must stay in K. Boundary labels are never
    violations; runs starting elsewhere carry no invariance claim.
    """
    problem = classifier.not_applicable(run.final.grid.domain, run.params)
    if problem is not None:
        return InvarianceReport(InvarianceStatus.NOT_APPLICABLE, problem, (), 0, None, 0)
    verdicts = [classifier.verdict(rec, run.params) for rec in run.trace]
    start = verdicts[0]
    violations: List[float] = []
    bound_violations = 0
    for rec, v in zip(run.trace, verdicts):
        if not v.bound_ok:
            bound_violations += 1
        if v.label == WellLabel.BOUNDARY.value:
            continue
        if start.label == WellLabel.Z.value:
            broken = v.label == WellLabel.W.value
        elif start.inside:
            broken = not v.inside
        else:
            broken = False
        if broken:
            violations.append(rec.t)
    status = InvarianceStatus.VIOLATED if violations or bound_violations else InvarianceStatus.INVARIANT
    if status is InvarianceStatus.VIOLATED:
        logger.warning(
            'invariance violated: %d label changes, %d bound failures (start %s)',
            len(violations),
            bound_violations,
            start.label,
        )
    return InvarianceReport(
        status,
        '',
        tuple(v.label for v in verdicts),
        len(violations),
        violations[0] if violations else None,
        bound_violations,
    )


@dataclass(frozen=True)
class ExistenceCriteria:
    defocusing: bool  # g <= 0
    subcritical: bool  # g > 0 and sigma < 2/d
    in_well: Optional[bool]  # u0 in W; None when not evaluated
    in_k: Optional[bool]  # u0 in K; None when not evaluated
    growup_hypothesis: bool  # g >= 0, sigma >= 2/d and E[u0] < 0

    @property
    def global_existence(self) -> bool:
        return self.defocusing or self.subcritical or bool(self.in_well) or bool(self.in_k)


def existence_criteria(
    u0: Field,
    params: FlowParams,
    wc: Optional[WellConstants] = None,
    qref: Optional[GroundState] = None,
) -> ExistenceCriteria:
    """Which sufficient conditions for global existence (or for grow-up) the datum meets."""
    d, s, g = params.d, params.sigma, params.g
    in_well: Optional[bool] = None
    if wc is not None and _bounded_problem(u0.grid.domain, params, wc) is None:
        in_well = classify_bounded(u0, params, wc).label is WellLabel.W
    in_k: Optional[bool] = None
    if qref is not None and WholeSpaceClassifier(qref).not_applicable(u0.grid.domain, params) is None:
        in_k = classify_whole_space(u0, params, qref).member
    return ExistenceCriteria(
        defocusing=g <= 0,
        subcritical=g > 0 and s < mass_critical_sigma(d),
        in_well=in_well,
        in_k=in_k,
        growup_hypothesis=g >= 0 and s >= mass_critical_sigma(d) and energy(u0, params) < 0,
    )
