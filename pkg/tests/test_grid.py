import math

import numpy as np
import pytest

from normheat.errors import FieldError, GridError
from normheat.grid import (
    DomainSpec,
    Field,
    apply_laplacian,
    build_grid,
    eigenpair,
    gradient_sq_norm,
    integrate,
    sphere_area,
)

from .helpers import ball_grid, interval_grid, line_grid


def test_interval_nodes_and_weights():
    # G1: x_j = j h, h = L / (n + 1), unit weights h
    grid = interval_grid(255)
    h = math.pi / 256
    assert grid.h == pytest.approx(h, rel=1e-15)
    assert grid.nodes[0] == pytest.approx(h)
    assert grid.nodes[-1] == pytest.approx(math.pi - h)
    assert integrate(grid, np.ones(grid.n)) == pytest.approx(255 * h, rel=1e-14)


def test_truncated_line_is_symmetric_whole_space():
    # G1: (-A, A) surrogate is flagged whole-space and centred
    grid = line_grid(101, 5.0)
    assert grid.domain.whole_space
    assert grid.nodes[50] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(grid.nodes, -grid.nodes[::-1], atol=1e-14)


def test_ball_shell_weights_sum_to_inner_ball():
    # G1: node j owns [r_j - h/2, r_j + h/2]; the last shell stops at R - h/2
    for d in (2, 3, 5):
        grid = ball_grid(200, 2.0, d)
        expected = sphere_area(d) * (2.0 - grid.h / 2) ** d / d
        assert integrate(grid, np.ones(grid.n)) == pytest.approx(expected, rel=1e-12)
        assert grid.nodes[0] == 0.0
        assert grid.edge_weights[0] == 0.0


def test_sphere_area_low_dimensions():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize('grid_fn', [lambda: interval_grid(64), lambda: ball_grid(64, 1.5, 3)])
def test_summation_by_parts_holds_to_rounding(grid_fn):
    # G2: <u, Delta_h v> = <Delta_h u, v> and |grad u|^2 = -<u, Delta_h u>
    grid = grid_fn()
    rng = np.random.default_rng(7)
    u = Field(grid, rng.standard_normal(grid.n))
    v = Field(grid, rng.standard_normal(grid.n))
    lu, lv = apply_laplacian(u).values, apply_laplacian(v).values
    scale = np.abs(grid.edge_weights).max() * grid.n
    assert integrate(grid, u.values * lv) == pytest.approx(integrate(grid, lu * v.values), abs=1e-10 * scale)
    assert gradient_sq_norm(u) == pytest.approx(-integrate(grid, u.values * lu), rel=1e-10)


def test_interval_eigenpairs_match_closed_form():
    # G3: lambda_k = (4 / h^2) sin^2(k h / 2) with eigenvector sin(k x)
    grid = interval_grid(255)
    h = grid.h
    for k in (1, 2):
        lam, e = eigenpair(grid, k)
        assert lam == pytest.approx(4 / h**2 * math.sin(k * h / 2) ** 2, rel=1e-9)
        assert integrate(grid, e.values**2) == pytest.approx(1.0, rel=1e-12)
        exact = np.sin(k * grid.nodes) * math.sqrt(2 / math.pi)
        sign = 1.0 if np.dot(exact, e.values) > 0 else -1.0
        np.testing.assert_allclose(sign * e.values, exact, atol=1e-9)
    assert np.all(eigenpair(grid, 1)[1].values > 0)


def test_discrete_sine_is_an_exact_laplacian_eigenvector():
    grid = interval_grid(127)
    u = Field.from_function(grid, np.sin)
    lam = 4 / grid.h**2 * math.sin(grid.h / 2) ** 2
    np.testing.assert_allclose(apply_laplacian(u).values, -lam * u.values, atol=1e-9)


def test_ball_first_eigenvalue_converges():
    # G3: d = 3 unit ball, lambda_1 = pi^2
    lam, e = eigenpair(ball_grid(400, 1.0, 3), 1)
    assert lam == pytest.approx(math.pi**2, rel=1e-3)
    assert np.all(e.values > 0)
    assert e.values[0] == e.values.max()


def test_eigenpair_index_out_of_range():
    grid = interval_grid(8)
    with pytest.raises(GridError):
        eigenpair(grid, 0)
    with pytest.raises(GridError):
        eigenpair(grid, 9)


def test_domain_validation():
    # G4: invalid geometry is a precondition error
    with pytest.raises(GridError):
        DomainSpec.ball(1.0, 1)
    with pytest.raises(GridError):
        DomainSpec.interval(-1.0)
    with pytest.raises(GridError):
        DomainSpec('interval', 1.0, 1, True)
    with pytest.raises(GridError):
        DomainSpec('interval', 1.0, 2)
    with pytest.raises(GridError):
        build_grid(DomainSpec.interval(1.0), 2)
    assert DomainSpec('truncated_line', 3.0).whole_space


def test_field_rejects_bad_values():
    grid = interval_grid(16)
    with pytest.raises(FieldError):
        Field(grid, np.full(16, np.nan))
    with pytest.raises(FieldError):
        Field(grid, np.zeros(15))
    u = Field.zeros(grid)
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_resample_is_piecewise_linear():
    # G5: transfer between grids of the same geometry
    coarse = interval_grid(255)
    fine = interval_grid(511)
    u = Field.from_function(coarse, np.sin).resample(fine)
    np.testing.assert_allclose(u.values, np.sin(fine.nodes), atol=1e-4)
    with pytest.raises(GridError):
        u.resample(ball_grid(10))


@pytest.mark.parametrize('grid_fn', [lambda: interval_grid(64), lambda: ball_grid(64, 1.5, 3)])
def test_laplacian_is_negative_definite(grid_fn):
    # G2: <u, Delta_h u>_h < 0 for every non-zero field
    grid = grid_fn()
    rng = np.random.default_rng(17)
    for _ in range(5):
        u = Field(grid, rng.standard_normal(grid.n))
        assert integrate(grid, u.values * apply_laplacian(u).values) < 0


def test_sine_quadrature_and_gradient_converge():
    # G3: sum h sin^2 = pi/2 exactly; |grad_h sin|^2 = (pi/2)(4/h^2) sin^2(h/2) -> pi/2 at O(h^2)
    errors = []
    for n in (31, 63, 127):
        grid = interval_grid(n)
        s = Field.from_function(grid, np.sin)
        assert integrate(grid, s.values**2) == pytest.approx(math.pi / 2, rel=1e-12)
        g2 = gradient_sq_norm(s)
        assert g2 == pytest.approx(math.pi / 2 * 4 / grid.h**2 * math.sin(grid.h / 2) ** 2, rel=1e-12)
        errors.append(abs(g2 - math.pi / 2))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.05)


def test_laplacian_is_second_order():
    # G3: Delta sin^3 = 6 sin cos^2 - 3 sin^3; the sup error drops by 4 when h halves
    def sup_error(n):
        grid = interval_grid(n)
        x = grid.nodes
        lap = apply_laplacian(Field.from_function(grid, lambda t: np.sin(t) ** 3)).values
        exact = 6 * np.sin(x) * np.cos(x) ** 2 - 3 * np.sin(x) ** 3
        return float(np.max(np.abs(lap - exact)))

    assert sup_error(63) / sup_error(127) == pytest.approx(4.0, rel=0.05)
