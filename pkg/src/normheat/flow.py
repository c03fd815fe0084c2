"""Time integration of the mass-preserving heat flow

    du/dt = Delta u + g |u|^(2 sigma) u + mu[u] u

with a semi-implicit scheme: diffusion implicit (one banded solve per step),
nonlinearity and multiplier explicit at u^n. Variants replace mu[u] by
mu_alpha[u] = I[u] / alpha, renormalize the iterate to the initial mass, or
drop both terms (plain Dirichlet heat flow).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import DegenerateField, Diverged, NumericalFailure, PreconditionError, TraceError
from .functionals import FlowParams, energy, nehari
from .grid import FloatArray, Field, Grid, gradient_sq_norm, integrate

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    MULTIPLIER = 'multiplier'
    PROJECTED = 'projected'
    MU_ALPHA = 'mu_alpha'
    LINEAR = 'linear'


class Termination(str, Enum):
    HORIZON_REACHED = 'HorizonReached'
    STATIONARY = 'Stationary'
    GROWUP_TRIGGERED = 'GrowUpTriggered'
    DIVERGED = 'Diverged'


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 1e-3
    t_final: float = 1.0
    scheme: Scheme = Scheme.MULTIPLIER
    alpha: Optional[float] = None
    stationarity_tol: float = 1e-10
    growup_factor: float = 10.0
    max_steps: Optional[int] = None
    snapshot_every: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, 'scheme', Scheme(self.scheme))
        if not (self.dt > 0 and self.t_final > 0):
            raise PreconditionError('dt and t_final must be > 0')
        if not self.dt < self.t_final:
            raise PreconditionError(f'dt = {self.dt:g} must be smaller than t_final = {self.t_final:g}')
        if not self.stationarity_tol > 0:
            raise PreconditionError('stationarity_tol must be > 0')
        if not self.growup_factor > 1:
            raise PreconditionError('growup_factor must be > 1')
        if self.max_steps is not None and self.max_steps < 0:
            raise PreconditionError('max_steps must be >= 0')
        if self.snapshot_every < 1:
            raise PreconditionError('snapshot_every must be >= 1')
        if self.scheme is Scheme.MU_ALPHA and not (self.alpha is not None and self.alpha > 0):
            raise PreconditionError('the mu_alpha scheme needs alpha > 0')

    @property
    def step_budget(self) -> int:
        steps = int(math.ceil(self.t_final / self.dt - 1e-9))
        if self.max_steps is not None:
            steps = min(steps, self.max_steps)
        return steps


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    mass: float
    energy: float
    mu: float
    grad_l2: float
    nehari: float
    linf: float
    umin: float
    edge: float
    step_residual: float  # |u^k - u^(k-1)| / dt; nan for the initial record

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.mass, self.energy, self.mu, self.grad_l2, self.nehari, self.linf)
        )


@dataclass(frozen=True)
class RunResult:
    final: Field
    trace: Tuple[DiagnosticsRecord, ...]
    termination: Termination
    params: FlowParams
    config: FlowConfig
    steps: int


def diagnose(u: Field, params: FlowParams, step: int, t: float, residual: float) -> DiagnosticsRecord:
    v = u.values
    m2 = integrate(u.grid, v * v)
    grad2 = gradient_sq_norm(u)
    nh = nehari(u, params)
    return DiagnosticsRecord(
        step=step,
        t=t,
        mass=math.sqrt(m2),
        energy=energy(u, params),
        mu=nh / m2 if m2 > 0 else math.nan,
        grad_l2=math.sqrt(grad2),
        nehari=nh,
        linf=float(np.max(np.abs(v))),
        umin=float(np.min(v)),
        edge=u.grid.edge_magnitude(v),
        step_residual=residual,
    )


def _check_dimension(grid: Grid, params: FlowParams) -> None:
    if grid.domain.dimension != params.d:
        raise PreconditionError(
            f'params are for d = {params.d} but the grid is {grid.domain.dimension}-dimensional'
        )


def _advance(
    u: Field,
    params: FlowParams,
    config: FlowConfig,
    banded: FloatArray,
    mass_target: Optional[float],
) -> FloatArray:
    grid = u.grid
    v = u.values
    dt = config.dt
    scheme = config.scheme
    with np.errstate(over='ignore', invalid='ignore'):
        if scheme is Scheme.LINEAR:
            rhs = v
        else:
            m2 = integrate(grid, v * v)
            if not m2 > 0:
                raise DegenerateField('the flow is not defined for the zero field')
            nh = nehari(u, params)
            multiplier = nh / config.alpha if scheme is Scheme.MU_ALPHA and config.alpha else nh / m2
            force = params.g * np.abs(v) ** (2.0 * params.sigma) * v
            rhs = v + dt * (force + multiplier * v)
        if not np.all(np.isfinite(rhs)):
            raise Diverged('non-finite right-hand side')
        try:
            new = solve_banded((1, 1), banded, grid.volume_weights * rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise NumericalFailure(f'implicit diffusion solve failed: {exc}') from exc
        if scheme is Scheme.PROJECTED:
            target = mass_target if mass_target is not None else math.sqrt(integrate(grid, v * v))
            norm = math.sqrt(integrate(grid, new * new))
            if not norm > 0:
                raise Diverged('iterate collapsed to zero before projection')
            new = new * (target / norm)
    if not np.all(np.isfinite(new)):
        raise Diverged('non-finite values after the implicit solve')
    return np.asarray(new, dtype=np.float64)


def step(
    u: Field,
    params: FlowParams,
    config: FlowConfig,
    mass_target: Optional[float] = None,
) -> Field:
    """One semi-implicit step: (Id - dt Delta_h) u^{n+1} = u^n + dt (g|u^n|^{2s} u^n + mu u^n).

    ``mass_target`` is the norm the projected scheme rescales to; it defaults
    to the mass of ``u``.
    """
    _check_dimension(u.grid, params)
    banded = u.grid.implicit_banded(config.dt)
    return Field(u.grid, _advance(u, params, config, banded, mass_target))


def evolve(u0: Field, params: FlowParams, config: FlowConfig) -> RunResult:
    grid = u0.grid
    _check_dimension(grid, params)
    first = diagnose(u0, params, 0, 0.0, math.nan)
    if not first.mass > 0:
        raise DegenerateField('initial datum must be non-zero')
    banded = grid.implicit_banded(config.dt)
    budget = config.step_budget
    trace: List[DiagnosticsRecord] = [first]
    grad0 = first.grad_l2
    termination = Termination.HORIZON_REACHED
    u = u0
    steps = 0
    logger.debug(
        'evolve: scheme=%s dt=%g steps<=%d n=%d', config.scheme.value, config.dt, budget, grid.n
    )
    for k in range(1, budget + 1):
        try:
            values = _advance(u, params, config, banded, first.mass)
        except Diverged as exc:
            logger.warning('run diverged at step %d: %s', k, exc)
            termination = Termination.DIVERGED
            break
        diff = values - u.values
        residual = math.sqrt(integrate(grid, diff * diff)) / config.dt
        candidate = Field(grid, values)
        rec = diagnose(candidate, params, k, k * config.dt, residual)
        if not rec.is_finite():
            logger.warning('run diverged at step %d: non-finite diagnostics', k)
            termination = Termination.DIVERGED
            break
        u = candidate
        steps = k
        stop: Optional[Termination] = None
        if residual < config.stationarity_tol:
            stop = Termination.STATIONARY
        elif grad0 > 0 and rec.grad_l2 > config.growup_factor * grad0:
            stop = Termination.GROWUP_TRIGGERED
        if stop is not None or k % config.snapshot_every == 0 or k == budget:
            trace.append(rec)
            logger.debug('t=%.6g E=%.12g mu=%.12g |grad u|=%.6g', rec.t, rec.energy, rec.mu, rec.grad_l2)
        if stop is not None:
            termination = stop
            break
    logger.info('evolve: %s after %d steps (t=%g)', termination.value, steps, steps * config.dt)
    return RunResult(u, tuple(trace), termination, params, config, steps)


def _dense_pairs(trace: Sequence[DiagnosticsRecord]) -> List[Tuple[DiagnosticsRecord, DiagnosticsRecord]]:
    if not trace:
        raise TraceError('empty trace')
    pairs = list(zip(trace, trace[1:]))
    for prev, rec in pairs:
        if rec.step != prev.step + 1:
            raise TraceError('trace is too sparse: record every step (snapshot_every = 1)')
    return pairs


def check_dissipation(run: RunResult, u0_energy: Optional[float] = None) -> float:
    """max_t |E(t) - E(0) + sum dt |(u^{k+1} - u^k)/dt|^2|, the discrete dissipation identity."""
    pairs = _dense_pairs(run.trace)
    e0 = run.trace[0].energy if u0_energy is None else u0_energy
    dissipated = 0.0
    worst = abs(run.trace[0].energy - e0)
    for prev, rec in pairs:
        dissipated += (rec.t - prev.t) * rec.step_residual**2
        worst = max(worst, abs(rec.energy - e0 + dissipated))
    return worst


def mass_formula_check(run: RunResult, alpha: Optional[float] = None) -> float:
    """Deviation of |u(t)|^2 from (|u0|^2 - alpha) exp((2/alpha) int I) + alpha."""
    if run.config.scheme is not Scheme.MU_ALPHA:
        raise TraceError('the mass formula applies to mu_alpha runs only')
    alpha = run.config.alpha if alpha is None else alpha
    if alpha is None or not alpha > 0:
        raise PreconditionError('alpha must be > 0')
    pairs = _dense_pairs(run.trace)
    m0sq = run.trace[0].mass ** 2
    integral = 0.0
    worst = 0.0
    for prev, rec in pairs:
        integral += 0.5 * (rec.t - prev.t) * (prev.nehari + rec.nehari)
        predicted = (m0sq - alpha) * math.exp(2.0 / alpha * integral) + alpha
        worst = max(worst, abs(rec.mass**2 - predicted))
    return worst


def linear_mass_check(run: RunResult) -> float:
    """Deviation of |u(t)|^2 from |u0|^2 - 2 int |grad u|^2 for the plain heat flow."""
    if run.config.scheme is not Scheme.LINEAR:
        raise TraceError('the linear mass identity applies to linear runs only')
    pairs = _dense_pairs(run.trace)
    m0sq = run.trace[0].mass ** 2
    integral = 0.0
    worst = 0.0
    for prev, rec in pairs:
        integral += 0.5 * (rec.t - prev.t) * (prev.grad_l2**2 + rec.grad_l2**2)
        worst = max(worst, abs(rec.mass**2 - (m0sq - 2.0 * integral)))
    return worst


def max_energy_increase(run: RunResult) -> float:
    """Largest E(t_{k+1}) - E(t_k) between consecutive records (<= 0 for a monotone trace)."""
    trace = run.trace
    if len(trace) < 2:
        return 0.0
    return max(rec.energy - prev.energy for prev, rec in zip(trace, trace[1:]))


def mass_drift(run: RunResult) -> float:
    m0 = run.trace[0].mass
    return max(abs(rec.mass - m0) for rec in run.trace) / m0


def positivity_violations(run: RunResult, rel_tol: float = 1e-10) -> List[DiagnosticsRecord]:
    bad = [rec for rec in run.trace if rec.umin < -rel_tol * rec.linf]
    if bad:
        logger.warning('positivity lost at %d recorded times (first t=%g)', len(bad), bad[0].t)
    return bad
