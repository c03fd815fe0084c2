import csv
import math

import numpy as np
import pytest

from normheat.errors import ConfigError
from normheat.flow import Scheme
from normheat.grid import DomainKind
from normheat.scenario import (
    TRACE_COLUMNS,
    parse_config,
    plan_tasks,
    read_field_csv,
    run_scenario,
    sha256_file,
    sweep,
)

from .helpers import INTERVAL_BASE, interval_grid, scenario_text, two_mode, write_seed_csv


def config_for(tmp_path, **extra):
    pairs = dict(INTERVAL_BASE)
    pairs.update({k.replace('__', '.'): v for k, v in extra.items()})
    return parse_config(scenario_text(pairs, tmp_path / 'out'))


def manifest_dict(text):
    out = {}
    for line in text.splitlines():
        key, _, value = line.partition(' = ')
        out[key] = value
    return out


def test_minimal_scenario_defaults(tmp_path):
    # C1: required keys only; everything else defaults
    cfg = config_for(tmp_path)
    assert cfg.domain.kind is DomainKind.INTERVAL
    assert cfg.domain.size == pytest.approx(math.pi)
    assert cfg.grid_n == 127 and cfg.g == -1.0 and cfg.sigma == 1.0
    assert cfg.flow.scheme is Scheme.MULTIPLIER
    assert cfg.tasks == () and cfg.initial is None
    assert [k for k, _ in cfg.settings] == ['domain', 'length', 'grid_n', 'g', 'sigma', 'output_dir']


def test_all_problems_are_reported_together():
    # C2: one ConfigError lists every problem
    text = 'domain = interval\nlength = 1\ngrid_n = abc\nsigma = -1\nfoo = 1\nbroken line\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    problems = '\n'.join(info.value.problems)
    assert 'grid_n: expected an integer' in problems
    assert 'sigma: must be > 0, got -1' in problems
    assert "unknown key 'foo'" in problems
    assert "line 6: expected 'key = value'" in problems
    assert 'g: missing required key' in problems
    assert info.value.exit_code == 1


def test_duplicate_and_conflicting_keys(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config('domain = interval\nlength = 1\nlength = 2\nradius = 3\ngrid_n = 8\ng = 1\nsigma = 1\n')
    problems = '\n'.join(info.value.problems)
    assert "duplicate key 'length'" in problems
    assert 'radius: not used by domain interval' in problems


def test_task_requirements(tmp_path):
    with pytest.raises(ConfigError) as info:
        config_for(tmp_path, tasks='evolve')
    assert 'tasks: evolve needs initial data (set initial)' in info.value.problems
    with pytest.raises(ConfigError) as info:
        parse_config('domain = truncated_line\nhalfwidth = 5\ngrid_n = 8\ng = 1\nsigma = 1\ntasks = sobolev\n')
    assert any('sobolev needs a bounded domain' in p for p in info.value.problems)
    with pytest.raises(ConfigError):
        config_for(tmp_path, scheme='mu_alpha', tasks='evolve', initial='eigenfunction')


def test_plan_inserts_dependencies(tmp_path):
    # C3: classify pulls in sobolev (bounded) or shoot (whole space)
    cfg = config_for(tmp_path, tasks='classify,evolve', initial='eigenfunction')
    assert plan_tasks(cfg) == (('sobolev', 'evolve', 'classify'), ('sobolev',))
    line = parse_config(
        'domain = truncated_line\nhalfwidth = 10\ngrid_n = 63\ng = 1\nsigma = 3\ninitial = gaussian\ntasks = classify\n'
    )
    assert plan_tasks(line) == (('shoot', 'classify'), ('shoot',))


def test_evolve_writes_artifacts_and_manifest(tmp_path):
    # C4: trace.csv, final.csv and manifest.txt with checksums
    cfg = config_for(tmp_path, initial='eigenfunction', dt=1e-3, t_final=0.1, tasks='evolve')
    manifest = run_scenario(cfg)
    assert manifest.exit_code == 0
    out = tmp_path / 'out'
    for name in ('trace.csv', 'final.csv'):
        assert manifest.get(f'artifact.{name}') == sha256_file(out / name)
    with (out / 'trace.csv').open(newline='') as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 1 + 101
    text = (out / 'manifest.txt').read_text()
    assert text == manifest.render()
    entries = manifest_dict(text)
    assert entries['result.evolve.termination'] == 'HorizonReached'
    assert entries['result.criticality.regime'] == 'subcritical'
    assert entries['exit_code'] == '0'
    assert float(entries['result.evolve.mass_drift']) < 1e-3


def test_manifest_replays_its_configuration(tmp_path):
    cfg = config_for(tmp_path, initial='eigenfunction', dt=1e-3, t_final=0.05, tasks='evolve')
    manifest = run_scenario(cfg)
    replay = parse_config(manifest.render())
    assert replay.settings == cfg.settings
    assert replay.flow == cfg.flow


def test_runs_are_byte_reproducible(tmp_path):
    # C5: identical configuration, identical artifacts
    first = config_for(tmp_path / 'a', initial='gaussian', initial__width=0.4, dt=1e-3, t_final=0.05, tasks='evolve')
    second = config_for(tmp_path / 'b', initial='gaussian', initial__width=0.4, dt=1e-3, t_final=0.05, tasks='evolve')
    run_scenario(first)
    run_scenario(second)
    for name in ('trace.csv', 'final.csv'):
        assert (tmp_path / 'a' / 'out' / name).read_bytes() == (tmp_path / 'b' / 'out' / name).read_bytes()


def test_classify_on_a_bounded_domain(tmp_path):
    # C3: sobolev is auto-inserted; an eigenfunction of mass 1/2 starts in W and stays there
    cfg = parse_config(
        scenario_text(
            {
                'domain': 'interval',
                'length': math.pi,
                'grid_n': 127,
                'g': 1,
                'sigma': 1,
                'initial': 'eigenfunction',
                'initial.mass': 0.5,
                'dt': 1e-3,
                't_final': 0.2,
                'tasks': 'evolve,classify',
            },
            tmp_path / 'out',
        )
    )
    entries = manifest_dict(run_scenario(cfg).render())
    assert entries['run.auto_inserted'] == 'sobolev'
    assert entries['run.tasks'] == 'sobolev,evolve,classify'
    assert entries['result.classify.label'] == 'W'
    assert entries['result.classify.invariance'] == 'Invariant'
    assert entries['result.classify.global_existence'] == 'True'
    assert float(entries['result.sobolev.p']) > 0
    assert entries['result.sobolev.certified'] == 'True'
    assert float(entries['result.sobolev.refinement_gap']) <= 1e-6
    assert 'caveat.sobolev' not in entries


def test_whole_space_classify_needs_supercritical_sigma(tmp_path):
    # C6: sigma <= 2/d fails the classify task with a regime error (exit 2)
    cfg = parse_config(
        scenario_text(
            {
                'domain': 'truncated_line',
                'halfwidth': 20,
                'grid_n': 255,
                'g': 1,
                'sigma': 1,
                'initial': 'gaussian',
                'tasks': 'classify',
            },
            tmp_path / 'out',
        )
    )
    manifest = run_scenario(cfg)
    assert manifest.exit_code == 2
    assert manifest.get('error.task') == 'classify'
    assert manifest.get('error.kind') == 'RegimeError'
    assert manifest.get('result.shoot.amplitude') != ''
    # the default r_max = 20 leaves |Q(edge)| / h^2 above shoot.edge_tol
    assert float(manifest.get('result.shoot.edge_residual')) > 1e-6
    assert 'r_max' in manifest.get('caveat.shoot')
    assert (tmp_path / 'out' / 'manifest.txt').exists()
    assert (tmp_path / 'out' / 'shoot.csv').exists()


def test_ground_state_task(tmp_path):
    cfg = config_for(
        tmp_path, g=1, grid_n=63, dt=0.05, t_final=200, stationarity_tol=1e-10, tasks='ground_state'
    )
    manifest = run_scenario(cfg)
    assert manifest.exit_code == 0
    assert float(manifest.get('result.ground_state.pde_sup')) <= 1e-5
    assert float(manifest.get('result.ground_state.mass')) == pytest.approx(1.0, rel=1e-12)
    assert (tmp_path / 'out' / 'ground_state.csv').exists()
    assert (tmp_path / 'out' / 'ground_state_trace.csv').exists()


def test_not_converged_is_exit_three(tmp_path):
    cfg = config_for(tmp_path, g=1, grid_n=31, dt=1e-3, t_final=1, max_steps=2, tasks='ground_state')
    manifest = run_scenario(cfg)
    assert manifest.exit_code == 3
    assert manifest.get('error.kind') == 'NotConverged'


def test_diverged_run_keeps_its_trace(tmp_path):
    cfg = config_for(
        tmp_path, g=1, sigma=2, initial='eigenfunction', initial__mass=1e70, dt=1e-3, t_final=0.01, tasks='evolve'
    )
    with np.errstate(over='ignore', invalid='ignore'):
        manifest = run_scenario(cfg)
    assert manifest.exit_code == 3
    assert manifest.get('result.evolve.termination') == 'Diverged'
    assert manifest.get('error.kind') == 'Diverged'
    assert (tmp_path / 'out' / 'trace.csv').exists()


def test_supercritical_sigma_is_a_caveat(tmp_path):
    cfg = parse_config(
        scenario_text(
            {
                'domain': 'ball',
                'radius': 1,
                'dimension': 3,
                'grid_n': 31,
                'g': -1,
                'sigma': 2,
                'initial': 'eigenfunction',
                'dt': 1e-3,
                't_final': 0.01,
                'tasks': 'evolve',
            },
            tmp_path / 'out',
        )
    )
    manifest = run_scenario(cfg)
    assert manifest.exit_code == 0
    assert 'energy-subcritical' in manifest.get('caveat.supercritical')
    assert manifest.get('result.criticality.regime') == 'energy-critical-or-worse'


def test_empty_task_list_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        run_scenario(config_for(tmp_path))


def test_seed_file_round_trip(tmp_path):
    grid = interval_grid(127)
    u = two_mode(grid)
    path = write_seed_csv(tmp_path / 'seed.csv', grid, u)
    back = read_field_csv(path, grid)
    assert back.values.tolist() == u.values.tolist()
    (tmp_path / 'bad.csv').write_text('coord,value\n0.1,abc\n')
    with pytest.raises(ConfigError):
        read_field_csv(tmp_path / 'bad.csv', grid)
    with pytest.raises(ConfigError):
        read_field_csv(tmp_path / 'missing.csv', grid)


def test_sweep_over_dt_shows_first_order_drift(tmp_path):
    # C7: mass drift halves with dt for the multiplier scheme
    grid = interval_grid(255)
    seed = write_seed_csv(tmp_path / 'seed.csv', grid, two_mode(grid))
    cfg = config_for(
        tmp_path, grid_n=255, initial='file', initial__path=seed, initial__mass=1, t_final=1, tasks='evolve'
    )
    summary = sweep(cfg, 'dt', ['1e-2', '5e-3', '2.5e-3'])
    assert summary == tmp_path / 'out' / 'sweep.csv'
    with summary.open(newline='') as f:
        rows = list(csv.DictReader(f))
    assert [r['dt'] for r in rows] == ['1e-2', '5e-3', '2.5e-3']
    assert all(r['exit_code'] == '0' for r in rows)
    drift = [float(r['mass_drift']) for r in rows]
    assert drift[0] / drift[1] == pytest.approx(2.0, abs=0.3)
    assert drift[1] / drift[2] == pytest.approx(2.0, abs=0.3)
    for i in range(3):
        assert (tmp_path / 'out' / f'dt_{i:03d}' / 'manifest.txt').exists()


def test_sweep_without_tasks_runs_evolve(tmp_path):
    # C7: a scenario without tasks is swept as an evolve run
    cfg = config_for(tmp_path, initial='eigenfunction', grid_n=63, dt=1e-3, t_final=0.05)
    assert cfg.tasks == ()
    summary = sweep(cfg, 'dt', ['1e-3', '5e-4'])
    with summary.open(newline='') as f:
        rows = list(csv.DictReader(f))
    assert [r['exit_code'] for r in rows] == ['0', '0']
    assert all(r['termination'] for r in rows)
    entries = manifest_dict((tmp_path / 'out' / 'dt_000' / 'manifest.txt').read_text(encoding='utf-8'))
    assert entries['run.tasks'] == 'evolve'
    assert entries['tasks'] == 'evolve'


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = config_for(tmp_path, initial='eigenfunction', grid_n=63, dt=1e-3, t_final=0.05, tasks='evolve')
    serial = sweep(cfg, 'g', ['-1', '0', '1'], output_dir=str(tmp_path / 'serial'))
    parallel = sweep(cfg, 'g', ['-1', '0', '1'], jobs=2, output_dir=str(tmp_path / 'parallel'))
    assert serial.read_bytes() == parallel.read_bytes()


def test_sweep_validation(tmp_path):
    cfg = config_for(tmp_path, initial='eigenfunction', tasks='evolve')
    with pytest.raises(ConfigError):
        sweep(cfg, 'length', ['1'])
    with pytest.raises(ConfigError):
        sweep(cfg, 'dt', [])
    with pytest.raises(ConfigError) as info:
        sweep(cfg, 'sigma', ['1', '-1'])
    assert any(p.startswith('sigma = -1: sigma: must be > 0') for p in info.value.problems)
