"""Scenario files, task orchestration, artifacts and sweeps.

A scenario is a flat UTF-8 text file of ``key = value`` lines (``#`` starts a
comment). Manifests use the same format: they echo every configured key and
add ``run.``, ``result.``, ``artifact.``, ``caveat.`` and ``error.`` entries,
which ``parse_config`` skips, so a manifest replays its run.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, TypeVar, Union, cast

import numpy as np

from . import __version__
from .errors import ConfigError, NormHeatError, PreconditionError
from .flow import (
    FlowConfig,
    RunResult,
    Scheme,
    Termination,
    check_dissipation,
    evolve,
    linear_mass_check,
    mass_drift,
    mass_formula_check,
    max_energy_increase,
    positivity_violations,
)
from .functionals import FlowParams, SupercriticalWarning, criticality, mass_critical_sigma, mass_norm
from .grid import DomainKind, DomainSpec, Field, Grid, build_grid, eigenpair
from .stationary import (
    GroundState,
    ShootingConfig,
    ShotProfile,
    gn_constant,
    ground_state_flow,
    ground_state_from_shot,
    shoot_profile,
)
from .wells import (
    BoundedWellClassifier,
    SnapshotClassifier,
    SobolevConfig,
    WellConstants,
    WholeSpaceClassifier,
    classify_bounded,
    classify_whole_space,
    existence_criteria,
    monitor_invariance,
    sobolev_constant,
)

logger = logging.getLogger(__name__)

T = TypeVar('T')

TASK_ORDER = ('sobolev', 'shoot', 'gn_constant', 'ground_state', 'evolve', 'classify')
INITIAL_KINDS = ('eigenfunction', 'gaussian', 'soliton', 'file')
IGNORED_PREFIXES = ('result.', 'artifact.', 'error.', 'caveat.', 'run.')
TRACE_COLUMNS = ('t', 'mass', 'energy', 'mu', 'grad_l2', 'nehari', 'linf', 'step_residual')
SWEEPABLE = {'dt': 'dt', 'grid_n': 'grid_n', 'g': 'g', 'sigma': 'sigma', 'mass': 'initial.mass'}
SUMMARY_COLUMNS = (
    ('exit_code', 'exit_code'),
    ('termination', 'result.evolve.termination'),
    ('final_energy', 'result.evolve.final_energy'),
    ('final_mu', 'result.evolve.final_mu'),
    ('mass_drift', 'result.evolve.mass_drift'),
    ('pde_sup', 'result.ground_state.pde_sup'),
    ('lambda', 'result.sobolev.lambda'),
    ('p', 'result.sobolev.p'),
    ('c_gn', 'result.gn_constant.value'),
)


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return '%.17g' % x


# --- value parsers --------------------------------------------------------


def _as_float(raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ValueError(f'expected a number, got {raw!r}') from None
    if not math.isfinite(v):
        raise ValueError(f'expected a finite number, got {raw!r}')
    return v


def _as_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f'expected an integer, got {raw!r}') from None


def _as_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ('true', 'yes', 'on', '1'):
        return True
    if low in ('false', 'no', 'off', '0'):
        return False
    raise ValueError(f'expected true/false, got {raw!r}')


def _as_str(raw: str) -> str:
    if not raw:
        raise ValueError('expected a non-empty value')
    return raw


def _choice(*names: str) -> Callable[[str], str]:
    def parse(raw: str) -> str:
        if raw not in names:
            raise ValueError(f'expected one of {", ".join(names)}, got {raw!r}')
        return raw

    return parse


def _as_tasks(raw: str) -> Tuple[str, ...]:
    tasks = [t.strip().replace('-', '_') for t in raw.split(',') if t.strip()]
    unknown = [t for t in tasks if t not in TASK_ORDER]
    if unknown:
        raise ValueError(f'unknown task(s) {", ".join(unknown)}; known: {", ".join(TASK_ORDER)}')
    return tuple(dict.fromkeys(tasks))


KEYS: Dict[str, Callable[[str], object]] = {
    'domain': _choice('interval', 'ball', 'truncated_line'),
    'length': _as_float,
    'radius': _as_float,
    'halfwidth': _as_float,
    'dimension': _as_int,
    'whole_space': _as_bool,
    'grid_n': _as_int,
    'g': _as_float,
    'sigma': _as_float,
    'initial': _choice(*INITIAL_KINDS),
    'initial.k': _as_int,
    'initial.mass': _as_float,
    'initial.center': _as_float,
    'initial.width': _as_float,
    'initial.path': _as_str,
    'dt': _as_float,
    't_final': _as_float,
    'scheme': _choice(*(s.value for s in Scheme)),
    'alpha': _as_float,
    'stationarity_tol': _as_float,
    'growup_factor': _as_float,
    'max_steps': _as_int,
    'snapshot_every': _as_int,
    'tasks': _as_tasks,
    'output_dir': _as_str,
    'shoot.r_max': _as_float,
    'shoot.lo': _as_float,
    'shoot.hi': _as_float,
    'shoot.tol': _as_float,
    'shoot.n': _as_int,
    'shoot.edge_tol': _as_float,
    'classify.tol': _as_float,
    'sobolev.tol': _as_float,
    'sobolev.max_iter': _as_int,
    'sobolev.certify_tol': _as_float,
}

_SIZE_KEY = {'interval': 'length', 'ball': 'radius', 'truncated_line': 'halfwidth'}


@dataclass(frozen=True)
class InitialData:
    kind: str
    k: int = 1
    center: Optional[float] = None
    width: float = 1.0
    path: Optional[str] = None


@dataclass(frozen=True)
class ScenarioConfig:
    domain: DomainSpec
    grid_n: int
    g: float
    sigma: float
    initial: Optional[InitialData]
    mass: Optional[float]
    flow: FlowConfig
    tasks: Tuple[str, ...]
    output_dir: str
    shooting: ShootingConfig
    sobolev: SobolevConfig
    classify_tol: float
    settings: Tuple[Tuple[str, str], ...]  # the configured keys, echoed into manifests

    def render(self) -> str:
        return ''.join(f'{k} = {v}\n' for k, v in self.settings)

    def with_settings(self, overrides: Mapping[str, str]) -> 'ScenarioConfig':
        return parse_config(self.render(), overrides)


def _read_pairs(text: str, problems: List[str]) -> Dict[str, str]:
    raw: Dict[str, str] = {}
    first_line: Dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        if key.startswith(IGNORED_PREFIXES) or key == 'exit_code':
            continue
        if key in first_line:
            problems.append(f'line {lineno}: duplicate key {key!r} (first set on line {first_line[key]})')
            continue
        first_line[key] = lineno
        if key not in KEYS:
            problems.append(f'line {lineno}: unknown key {key!r}')
            continue
        raw[key] = value
    return raw


def parse_config(text: str, overrides: Optional[Mapping[str, str]] = None) -> ScenarioConfig:
    """Parse and validate a scenario; every problem found is reported in one ConfigError.

    ``overrides`` replace (or add) keys before validation; the CLI uses them
    for ``--out``, ``--seed-file`` and the subcommand's task.
    """
    problems: List[str] = []
    raw = _read_pairs(text, problems)
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            problems.append(f'unknown key {key!r}')
            continue
        raw[key] = value

    values: Dict[str, object] = {}
    for key, value in raw.items():
        try:
            values[key] = KEYS[key](value)
        except ValueError as exc:
            problems.append(f'{key}: {exc}')

    def get(key: str, default: object = None) -> object:
        return values.get(key, default)

    for key in ('domain', 'grid_n', 'g', 'sigma'):
        if key not in raw:
            problems.append(f'{key}: missing required key')

    sigma = get('sigma')
    if isinstance(sigma, float) and not sigma > 0:
        problems.append(f'sigma: must be > 0, got {raw["sigma"]}')
    grid_n = get('grid_n')
    if isinstance(grid_n, int) and grid_n < 3:
        problems.append(f'grid_n: must be >= 3, got {grid_n}')
    mass = get('initial.mass')
    if isinstance(mass, float) and not mass > 0:
        problems.append(f'initial.mass: must be > 0, got {raw["initial.mass"]}')

    domain: Optional[DomainSpec] = None
    kind = get('domain')
    if isinstance(kind, str):
        size_key = _SIZE_KEY[kind]
        for other in _SIZE_KEY.values():
            if other != size_key and other in raw:
                problems.append(f'{other}: not used by domain {kind} (set {size_key})')
        size = get(size_key)
        if size_key not in raw:
            problems.append(f'{size_key}: missing (required by domain {kind})')
        elif isinstance(size, float):
            dim = get('dimension', 1)
            try:
                whole = bool(get('whole_space', False))
                dimension = dim if isinstance(dim, int) else 1
                domain = DomainSpec(DomainKind(kind), size, dimension, whole)
            except NormHeatError as exc:
                problems.append(f'domain: {exc}')

    initial: Optional[InitialData] = None
    ikind = get('initial')
    if isinstance(ikind, str):
        k = get('initial.k', 1)
        center = get('initial.center')
        width = get('initial.width', 1.0)
        path = get('initial.path')
        if ikind == 'eigenfunction' and isinstance(k, int):
            if k < 1 or (isinstance(grid_n, int) and k > grid_n):
                problems.append(f'initial.k: must be in 1..grid_n, got {k}')
        if ikind == 'gaussian' and isinstance(width, float) and not width > 0:
            problems.append(f'initial.width: must be > 0, got {width}')
        if ikind == 'file' and 'initial.path' not in raw:
            problems.append('initial.path: missing (required by initial = file)')
        if domain is not None and domain.radial and isinstance(center, float) and center != 0:
            problems.append('initial.center: radial domains are centred at r = 0')
        initial = InitialData(
            ikind,
            k if isinstance(k, int) else 1,
            center if isinstance(center, float) else None,
            width if isinstance(width, float) else 1.0,
            path if isinstance(path, str) else None,
        )

    flow_kwargs = {
        name: values[name]
        for name in ('dt', 't_final', 'alpha', 'stationarity_tol', 'growup_factor', 'max_steps', 'snapshot_every')
        if name in values
    }
    if 'scheme' in values:
        flow_kwargs['scheme'] = Scheme(str(values['scheme']))
    flow = _build(FlowConfig, flow_kwargs, 'flow', problems) or FlowConfig()
    shoot_kwargs = {
        name.split('.', 1)[1]: values[name]
        for name in ('shoot.r_max', 'shoot.lo', 'shoot.hi', 'shoot.tol', 'shoot.n', 'shoot.edge_tol')
        if name in values
    }
    shooting = _build(ShootingConfig, shoot_kwargs, 'shoot', problems) or ShootingConfig()
    sob_kwargs = {
        name.split('.', 1)[1]: values[name]
        for name in ('sobolev.tol', 'sobolev.max_iter', 'sobolev.certify_tol')
        if name in values
    }
    sobolev = _build(SobolevConfig, sob_kwargs, 'sobolev', problems) or SobolevConfig()
    classify_tol = get('classify.tol', 1e-8)
    if isinstance(classify_tol, float) and not classify_tol > 0:
        problems.append('classify.tol: must be > 0')

    tasks = get('tasks', ())
    assert isinstance(tasks, tuple)
    for task in tasks:
        if task in ('evolve', 'classify') and initial is None:
            problems.append(f'tasks: {task} needs initial data (set initial)')
        if task == 'sobolev' and domain is not None and domain.whole_space:
            problems.append('tasks: sobolev needs a bounded domain (whole_space is set)')

    if problems:
        raise ConfigError(problems)
    assert domain is not None
    settings = tuple((key, raw[key]) for key in KEYS if key in raw)
    return ScenarioConfig(
        domain=domain,
        grid_n=cast(int, values['grid_n']),
        g=cast(float, values['g']),
        sigma=cast(float, values['sigma']),
        initial=initial,
        mass=mass if isinstance(mass, float) else None,
        flow=flow,
        tasks=tasks,
        output_dir=str(get('output_dir', 'normheat-out')),
        shooting=shooting,
        sobolev=sobolev,
        classify_tol=cast(float, classify_tol),
        settings=settings,
    )


def _build(cls: Callable[..., T], kwargs: Mapping[str, object], label: str, problems: List[str]) -> Optional[T]:
    try:
        return cls(**kwargs)
    except (NormHeatError, TypeError) as exc:
        problems.append(f'{label}: {exc}')
        return None


# --- artifacts ------------------------------------------------------------


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open('rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            h.update(block)
    return h.hexdigest()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with path.open('w', newline='', encoding='utf-8') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def write_trace_csv(path: Path, run_trace: Iterable[object]) -> None:
    write_csv(path, TRACE_COLUMNS, ([float(getattr(rec, c)) for c in TRACE_COLUMNS] for rec in run_trace))


def write_field_csv(path: Path, u: Field) -> None:
    write_csv(path, ('coord', 'value'), zip(u.grid.nodes.tolist(), u.values.tolist()))


def read_field_csv(path: Union[str, Path], grid: Grid) -> Field:
    """Load a coord,value CSV and interpolate it linearly onto ``grid`` (zero outside)."""
    p = Path(path)
    try:
        with p.open(newline='', encoding='utf-8') as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise ConfigError([f'{p}: cannot read field file ({exc.strerror})']) from exc
    if rows and [c.strip() for c in rows[0]] == ['coord', 'value']:
        rows = rows[1:]
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows if r], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ConfigError([f'{p}: expected numeric coord,value rows']) from exc
    if data.shape[0] < 2 or not np.all(np.isfinite(data)):
        raise ConfigError([f'{p}: need at least two finite coord,value rows'])
    order = np.argsort(data[:, 0], kind='stable')
    xs, ys = data[order, 0], data[order, 1]
    return Field(grid, np.interp(grid.nodes, xs, ys, left=0.0, right=0.0))


@dataclass
class RunManifest:
    entries: List[Tuple[str, str]] = field(default_factory=list)
    exit_code: int = 0
    path: Optional[Path] = None

    def add(self, key: str, value: object) -> None:
        if isinstance(value, float):
            text = fmt(value)
        else:
            text = ' '.join(str(value).split())
        self.entries.append((key, text))

    def get(self, key: str, default: str = '') -> str:
        for k, v in self.entries:
            if k == key:
                return v
        return default

    def fail(self, task: str, exc: NormHeatError) -> None:
        self.add('error.task', task)
        self.add('error.kind', type(exc).__name__)
        self.add('error.message', str(exc))
        self.exit_code = exc.exit_code

    def render(self) -> str:
        lines = [f'{k} = {v}' for k, v in self.entries]
        lines.append(f'exit_code = {self.exit_code}')
        return '\n'.join(lines) + '\n'


# --- initial data ---------------------------------------------------------


def _centre(domain: DomainSpec, initial: InitialData) -> float:
    if domain.radial:
        return 0.0
    if initial.center is not None:
        return initial.center
    left, right = domain.bounds
    return 0.5 * (left + right)


def _transplant(profile: Field, grid: Grid, centre: float) -> Field:
    """Place a radial or line profile centred at ``centre`` onto ``grid``."""
    src = profile.grid
    radial = np.abs(src.nodes) if not src.domain.radial else src.nodes
    order = np.argsort(radial, kind='stable')
    xs, ys = radial[order], profile.values[order]
    dist = np.abs(grid.nodes - centre)
    return Field(grid, np.interp(dist, xs, ys, right=0.0))


def build_initial(config: ScenarioConfig, grid: Grid, params: FlowParams) -> Field:
    init = config.initial
    if init is None:
        raise ConfigError(['initial: no initial data configured'])
    if init.kind == 'eigenfunction':
        u = eigenpair(grid, init.k)[1]
        mass: Optional[float] = config.mass if config.mass is not None else 1.0
    elif init.kind == 'gaussian':
        c = _centre(grid.domain, init)
        u = Field.from_function(grid, lambda x: np.exp(-((x - c) ** 2) / (2.0 * init.width**2)))
        mass = config.mass if config.mass is not None else 1.0
    elif init.kind == 'soliton':
        shot_params = params if params.g > 0 else params.with_g(1.0)
        shot = shoot_profile(shot_params, config.shooting)
        u = _transplant(shot.profile, grid, _centre(grid.domain, init))
        mass = config.mass
    else:
        assert init.path is not None
        u = read_field_csv(init.path, grid)
        mass = config.mass
    if mass is not None:
        m = mass_norm(u)
        if not m > 0:
            raise PreconditionError('initial datum vanishes on the grid')
        u = u.scaled(mass / m)
    return u


# --- orchestration --------------------------------------------------------


def plan_tasks(config: ScenarioConfig) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    """Tasks in execution order, plus the ones added to satisfy dependencies."""
    wanted = set(config.tasks)
    inserted: List[str] = []
    if 'classify' in wanted:
        need = 'shoot' if config.domain.whole_space else 'sobolev'
        if need not in wanted:
            wanted.add(need)
            inserted.append(need)
    return tuple(t for t in TASK_ORDER if t in wanted), tuple(inserted)


class _Scenario:
    def __init__(self, config: ScenarioConfig, out: Path, manifest: RunManifest, params: FlowParams):
        self.config = config
        self.out = out
        self.manifest = manifest
        self.params = params
        self.grid = build_grid(config.domain, config.grid_n)
        self._u0: Optional[Field] = None
        self.wc: Optional[WellConstants] = None
        self.shot: Optional[ShotProfile] = None
        self.qref: Optional[GroundState] = None
        self.run: Optional[RunResult] = None

    @property
    def u0(self) -> Field:
        if self._u0 is None:
            self._u0 = build_initial(self.config, self.grid, self.params)
        return self._u0

    def artifact(self, name: str, writer: Callable[[Path], None]) -> None:
        path = self.out / name
        writer(path)
        self.manifest.add(f'artifact.{name}', sha256_file(path))

    def result(self, key: str, value: object) -> None:
        self.manifest.add(f'result.{key}', value)

    def sobolev(self) -> None:
        wc = sobolev_constant(self.grid, self.config.sigma, self.config.sobolev)
        self.wc = wc
        self.result('sobolev.lambda', wc.lam)
        self.result('sobolev.p', wc.p)
        self.result('sobolev.iterations', wc.iterations)
        self.result('sobolev.residual', wc.residual)
        if wc.lam_extrapolated is not None:
            self.result('sobolev.lambda_extrapolated', wc.lam_extrapolated)
        if wc.certified is not None and wc.refinement_gap is not None:
            self.result('sobolev.refinement_gap', wc.refinement_gap)
            self.result('sobolev.certified', wc.certified)
            if not wc.certified:
                self.manifest.add('caveat.sobolev', 'extrapolated Sobolev constant not stable across two refinements')

    def shoot(self) -> None:
        shot = shoot_profile(self.params, self.config.shooting)
        self.shot = shot
        self.qref = ground_state_from_shot(shot)
        res = self.qref.residuals
        self.result('shoot.amplitude', shot.amplitude)
        self.result('shoot.split_radius', shot.split_radius)
        self.result('shoot.edge_residual', shot.edge_residual)
        if shot.edge_residual > self.config.shooting.edge_tol:
            self.manifest.add('caveat.shoot', 'profile not decayed at the grid edge; raise shoot.r_max')
        self.result('shoot.mass', self.qref.mass_target)
        self.result('shoot.pde_sup', res.pde_sup)
        self.result('shoot.pohozaev1', res.pohozaev1)
        if res.pohozaev2 is not None and res.energy_relation is not None:
            self.result('shoot.pohozaev2', res.pohozaev2)
            self.result('shoot.energy_relation', res.energy_relation)
        self.artifact('shoot.csv', lambda p: write_field_csv(p, shot.profile))

    def gn_constant(self) -> None:
        ref = self.qref if self.qref is not None and self.qref.params.g == 1.0 else None
        gn = gn_constant(self.params, self.config.shooting, reference=ref)
        self.result('gn_constant.value', gn.value)
        self.result('gn_constant.pohozaev_value', gn.pohozaev_value)
        self.result('gn_constant.printed_exponent_value', gn.printed_exponent_value)
        self.result('gn_constant.relative_gap', gn.relative_gap)

    def ground_state(self) -> None:
        cfg = self.config
        seed = self.u0 if cfg.initial is not None else None
        mass = cfg.mass if cfg.mass is not None else 1.0
        gs = ground_state_flow(self.grid, self.params, mass, cfg.flow, seed=seed)
        res = gs.residuals
        self.result('ground_state.mu', gs.mu_value)
        self.result('ground_state.mass', mass_norm(gs.profile))
        self.result('ground_state.pde_sup', res.pde_sup)
        self.result('ground_state.pohozaev1', res.pohozaev1)
        if res.pohozaev2 is not None and res.energy_relation is not None:
            self.result('ground_state.pohozaev2', res.pohozaev2)
            self.result('ground_state.energy_relation', res.energy_relation)
        if cfg.domain.whole_space and self.params.g > 0 and self.params.sigma < mass_critical_sigma(self.params.d):
            self.manifest.add(
                'caveat.uniqueness', 'positive minimizer assumed unique on the truncated whole-space surrogate'
            )
        self.artifact('ground_state.csv', lambda p: write_field_csv(p, gs.profile))
        self.artifact('ground_state_trace.csv', lambda p: write_trace_csv(p, gs.trace))

    def evolve(self) -> None:
        cfg = self.config
        run = evolve(self.u0, self.params, cfg.flow)
        self.run = run
        last = run.trace[-1]
        self.result('evolve.termination', run.termination.value)
        self.result('evolve.steps', run.steps)
        self.result('evolve.final_time', last.t)
        self.result('evolve.final_energy', last.energy)
        self.result('evolve.final_mu', last.mu)
        self.result('evolve.final_mass', last.mass)
        self.result('evolve.final_grad_l2', last.grad_l2)
        self.result('evolve.mass_drift', mass_drift(run))
        self.result('evolve.max_energy_increase', max_energy_increase(run))
        self.result('evolve.positivity_violations', len(positivity_violations(run)))
        if cfg.flow.snapshot_every == 1:
            if cfg.flow.scheme in (Scheme.MULTIPLIER, Scheme.PROJECTED):
                self.result('evolve.dissipation_residual', check_dissipation(run))
            elif cfg.flow.scheme is Scheme.MU_ALPHA:
                self.result('evolve.mass_formula_residual', mass_formula_check(run))
            else:
                self.result('evolve.linear_mass_residual', linear_mass_check(run))
        edge = max((rec.edge / rec.linf for rec in run.trace if rec.linf > 0), default=0.0)
        if cfg.domain.whole_space and edge > 1e-6:
            logger.warning('field reaches the truncation edge (|u|/max|u| = %.2e)', edge)
            self.manifest.add('caveat.truncation', f'edge value {fmt(edge)} of the peak; enlarge the domain')
        self.artifact('trace.csv', lambda p: write_trace_csv(p, run.trace))
        self.artifact('final.csv', lambda p: write_field_csv(p, run.final))
        if run.termination is Termination.DIVERGED:
            self.manifest.add('error.task', 'evolve')
            self.manifest.add('error.kind', 'Diverged')
            self.manifest.add('error.message', f'non-finite values after t = {fmt(last.t)}')
            self.manifest.exit_code = 3

    def classify(self) -> None:
        cfg = self.config
        u0 = self.u0
        classifier: SnapshotClassifier
        if cfg.domain.whole_space:
            assert self.qref is not None
            k = classify_whole_space(u0, self.params, self.qref)
            self.result('classify.member', k.member)
            self.result('classify.energy_product', k.energy_product)
            self.result('classify.grad_product', k.grad_product)
            self.result('classify.energy_threshold', k.energy_threshold)
            self.result('classify.grad_threshold', k.grad_threshold)
            classifier = WholeSpaceClassifier(self.qref)
        else:
            assert self.wc is not None
            w = classify_bounded(u0, self.params, self.wc, cfg.classify_tol)
            self.result('classify.label', w.label.value)
            self.result('classify.energy', w.energy)
            self.result('classify.nehari', w.nehari)
            self.result('classify.margin', w.margin)
            self.result('classify.small_gradient', w.small_gradient)
            classifier = BoundedWellClassifier(self.wc, cfg.classify_tol)
        crit = existence_criteria(u0, self.params, self.wc, self.qref)
        self.result('classify.global_existence', crit.global_existence)
        self.result('classify.growup_hypothesis', crit.growup_hypothesis)
        if self.run is not None:
            report = monitor_invariance(self.run, classifier)
            self.result('classify.invariance', report.status.value)
            self.result('classify.violations', report.violations)
            self.result('classify.bound_violations', report.bound_violations)
            if report.first_violation_t is not None:
                self.result('classify.first_violation_t', report.first_violation_t)


def run_scenario(config: ScenarioConfig) -> RunManifest:
    """Run the configured tasks in dependency order and write artifacts and manifest.

    A failing task is recorded in the manifest (task, kind, message, exit code)
    and stops the remaining tasks; the manifest is written either way.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(list(config.settings))
    manifest.add('run.version', __version__)
    tasks, inserted = plan_tasks(config)
    if not tasks:
        raise ConfigError(['tasks: nothing to run (set tasks or use a subcommand)'])
    manifest.add('run.tasks', ','.join(tasks))
    if inserted:
        manifest.add('run.auto_inserted', ','.join(inserted))
        logger.warning('auto-inserted task(s): %s', ', '.join(inserted))
    task = 'setup'
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always', SupercriticalWarning)
            params = FlowParams.for_domain(config.domain, config.g, config.sigma)
        for w in caught:
            logger.warning('%s', w.message)
            manifest.add('caveat.supercritical', str(w.message))
        crit = criticality(params)
        manifest.add('result.criticality.regime', crit.regime.value)
        if crit.alpha is not None:
            manifest.add('result.criticality.alpha', crit.alpha)
        if config.domain.whole_space and not crit.whole_space_wellposed:
            manifest.add('caveat.wellposedness', 'sigma outside the proven whole-space well-posedness range')
        scenario = _Scenario(config, out, manifest, params)
        for task in tasks:
            logger.info('task %s', task)
            getattr(scenario, task)()
            if manifest.exit_code:
                break
    except NormHeatError as exc:
        logger.error('%s: %s', task, exc)
        manifest.fail(task, exc)
    path = out / 'manifest.txt'
    path.write_text(manifest.render(), encoding='utf-8')
    manifest.path = path
    return manifest


# --- sweeps ---------------------------------------------------------------


def _run_text(text: str) -> RunManifest:
    return run_scenario(parse_config(text))


def sweep(
    base: ScenarioConfig,
    parameter: str,
    values: Sequence[Union[str, float, int]],
    jobs: int = 1,
    output_dir: Optional[str] = None,
) -> Path:
    """Run ``base`` once per value of ``parameter`` and write ``sweep.csv``.

    Scenario i writes into ``<output_dir>/<parameter>_<i>``; rows follow the
    order of ``values`` whatever order the workers finish in.
    """
    if parameter not in SWEEPABLE:
        raise ConfigError([f'sweep: {parameter!r} is not sweepable (choose from {", ".join(SWEEPABLE)})'])
    if not values:
        raise ConfigError(['sweep: empty list of values'])
    root = Path(output_dir or base.output_dir)
    texts: List[str] = []
    problems: List[str] = []
    defaults: Dict[str, str] = {}
    if not base.tasks:
        defaults['tasks'] = 'evolve'
        logger.info('sweep: no tasks configured, running evolve')
    for i, value in enumerate(values):
        raw = value if isinstance(value, str) else repr(value)
        try:
            overrides = dict(defaults)
            overrides[SWEEPABLE[parameter]] = raw
            overrides['output_dir'] = str(root / f'{parameter}_{i:03d}')
            cfg = base.with_settings(overrides)
        except ConfigError as exc:
            problems.extend(f'{parameter} = {raw}: {p}' for p in exc.problems)
            continue
        texts.append(cfg.render())
    if problems:
        raise ConfigError(problems)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            manifests = list(pool.map(_run_text, texts))
    else:
        manifests = [_run_text(t) for t in texts]
    root.mkdir(parents=True, exist_ok=True)
    summary = root / 'sweep.csv'
    header = [parameter] + [name for name, _ in SUMMARY_COLUMNS]
    rows = []
    for value, m in zip(values, manifests):
        row = [value if isinstance(value, str) else repr(value)]
        for name, key in SUMMARY_COLUMNS:
            row.append(str(m.exit_code) if name == 'exit_code' else m.get(key))
        rows.append(row)
    write_csv(summary, header, rows)
    logger.info('sweep over %s: %d scenarios -> %s', parameter, len(rows), summary)
    return summary
