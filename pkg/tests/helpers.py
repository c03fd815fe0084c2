import math
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from normheat.functionals import mass_norm
from normheat.grid import DomainSpec, Field, Grid, build_grid, eigenpair


def interval_grid(n: int = 255, length: float = math.pi) -> Grid:
    return build_grid(DomainSpec.interval(length), n)


def line_grid(n: int = 4095, halfwidth: float = 20.0) -> Grid:
    return build_grid(DomainSpec.truncated_line(halfwidth), n)


def ball_grid(n: int, radius: float = 1.0, d: int = 3, whole_space: bool = False) -> Grid:
    return build_grid(DomainSpec.ball(radius, d, whole_space), n)


def with_mass(u: Field, mass: float) -> Field:
    return u.scaled(mass / mass_norm(u))


def eigenmode(grid: Grid, k: int = 1, mass: float = 1.0) -> Field:
    return with_mass(eigenpair(grid, k)[1], mass)


def two_mode(grid: Grid, mass: float = 1.0, third: float = 0.3) -> Field:
    """sin x + c sin 3x on (0, pi): smooth, positive for c < 1/2, two Dirichlet modes."""
    return with_mass(Field.from_function(grid, lambda x: np.sin(x) + third * np.sin(3 * x)), mass)


def gaussian(grid: Grid, amplitude: float = 1.0, centre: float = 0.0, width: float = 1.0) -> Field:
    return Field.from_function(grid, lambda x: amplitude * np.exp(-((x - centre) ** 2) / width**2))


def soliton(grid: Grid) -> Field:
    """sqrt(2) sech x, the mu = -1 profile for g = 1, sigma = 1 on the line."""
    return Field.from_function(grid, lambda x: math.sqrt(2.0) / np.cosh(x))


def scenario_text(pairs: Dict[str, object], output_dir: Optional[Path] = None) -> str:
    lines = [f'{k} = {v}' for k, v in pairs.items()]
    if output_dir is not None:
        lines.append(f'output_dir = {output_dir}')
    return '\n'.join(lines) + '\n'


def write_scenario(path: Path, pairs: Dict[str, object], output_dir: Optional[Path] = None) -> Path:
    path.write_text(scenario_text(pairs, output_dir), encoding='utf-8')
    return path


def write_seed_csv(path: Path, grid: Grid, u: Field) -> Path:
    rows = ['coord,value'] + [f'{x!r},{v!r}' for x, v in zip(grid.nodes.tolist(), u.values.tolist())]
    path.write_text('\n'.join(rows) + '\n', encoding='utf-8')
    return path


INTERVAL_BASE: Dict[str, object] = {
    'domain': 'interval',
    'length': math.pi,
    'grid_n': 127,
    'g': -1,
    'sigma': 1,
}
