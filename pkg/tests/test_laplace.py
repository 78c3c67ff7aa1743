import math

import numpy as np
import pytest

from starfactor import laplace
from starfactor.errors import RegionError, VerificationError
from starfactor.laplace import RegionPoint
from starfactor.reporting import Check, all_passed, require
from starfactor.theory import variance_ratio

CERTIFIED = list(range(4, 11))
GENERIC = RegionPoint(p=0.05, q=0.03, r=0.04, s=0.02, t=0.01)


def test_closed_form_maximizers():
    assert laplace.x_max_closed_form(6).as_tuple() == pytest.approx((3 / 32, 9 / 320, 9 / 320, 1 / 320, 1 / 320))
    assert laplace.x_max_closed_form(4).as_tuple() == pytest.approx((9 / 64, 0, 3 / 64, 1 / 64, 0))
    assert laplace.x_max_closed_form(5).t == 0
    for d in CERTIFIED:
        assert laplace.x_max_closed_form(d).in_region(d)


def test_region_membership():
    assert not RegionPoint(p=0.3).in_region()
    assert not RegionPoint(p=-0.01).in_region()
    assert laplace.C1.in_region(6)
    with pytest.raises(RegionError):
        laplace.log_F(RegionPoint(p=0.2, q=0.2), 6)
    np.testing.assert_allclose(laplace.C1.face_values(6)[-2:], [0.0, 0.0], atol=1e-15)


def test_active_coordinates():
    assert laplace.active_coordinates(4) == (0, 2, 3)
    assert laplace.active_coordinates(5) == (0, 1, 2, 3)
    assert laplace.active_coordinates(9) == (0, 1, 2, 3, 4)
    point = RegionPoint.from_active([0.1, 0.02, 0.01], (0, 2, 3))
    assert point.as_tuple() == (0.1, 0.0, 0.02, 0.01, 0.0)


def test_F_values():
    assert laplace.eval_F(laplace.x_max_closed_form(6), 6) == pytest.approx(35.29256074, rel=1e-9)
    assert laplace.F_max_closed_form(6) == pytest.approx(35.29256074, rel=1e-9)
    assert laplace.eval_F(laplace.C1, 6) == pytest.approx(22.5435772, rel=1e-8)
    for d in CERTIFIED:
        assert laplace.eval_F(laplace.x_max_closed_form(d), d) == pytest.approx(laplace.F_max_closed_form(d), rel=1e-12)
        assert laplace.eval_F(laplace.C1, d) == pytest.approx(laplace.F_c1_closed_form(d), rel=1e-12)


def test_F_vanishes_off_reduced_face():
    assert laplace.eval_F(RegionPoint(p=0.1, q=0.01, r=0.02), 4) == 0.0
    assert laplace.eval_F(RegionPoint(p=0.1, r=0.02, t=0.01), 5) == 0.0
    assert laplace.eval_F(RegionPoint(p=0.1, q=0.01, r=0.02), 5) > 0


def test_F_is_continuous_toward_the_boundary():
    d = 6
    start = laplace.x_max_closed_form(d).as_array()
    end = laplace.C1.as_array()
    near = RegionPoint.from_array(start + (1 - 1e-9) * (end - start))
    assert laplace.eval_F(near, d) == pytest.approx(laplace.eval_F(laplace.C1, d), rel=1e-5)
    origin_ray = RegionPoint.from_array(1e-12 * start)
    assert laplace.eval_F(origin_ray, d) == pytest.approx(laplace.eval_F(RegionPoint(), d), rel=1e-6)


@pytest.mark.parametrize("d", CERTIFIED)
def test_stationarity_at_closed_form(d):
    residuals = laplace.stationarity_residuals(laplace.x_max_closed_form(d), d)
    assert len(residuals) == len(laplace.active_coordinates(d))
    assert max(abs(value) for value in residuals.values()) < 1e-10
    assert np.linalg.norm(laplace.gradient_logF(laplace.x_max_closed_form(d), d)) < 1e-9


@pytest.mark.parametrize("d", CERTIFIED)
def test_elimination_identities(d):
    residuals = laplace.elimination_residuals(laplace.x_max_closed_form(d), d)
    assert ('eqp' in residuals) == (d >= 5)
    assert max(abs(value) for value in residuals.values()) < 1e-10


def test_generic_point_is_not_stationary():
    residuals = laplace.stationarity_residuals(GENERIC, 6)
    assert max(abs(value) for value in residuals.values()) > 1e-3
    assert np.linalg.norm(laplace.gradient_logF(GENERIC, 6)) > 1e-3


def test_residuals_at_c1_are_undefined():
    residuals = laplace.stationarity_residuals(laplace.C1, 6)
    assert math.isnan(residuals['eqa'])


@pytest.mark.parametrize("d", CERTIFIED)
def test_hessian_is_negative_definite(d):
    x = laplace.x_max_closed_form(d)
    finite = laplace.hessian_logF(x, d)
    analytic = laplace.hessian_logF(x, d, method='analytic')
    from_gradient = laplace.hessian_logF(x, d, method='gradient-difference')
    assert finite.negative_definite and analytic.negative_definite
    scale = np.abs(analytic.matrix).max()
    assert np.abs(finite.matrix - analytic.matrix).max() / scale < 1e-5
    assert np.abs(finite.matrix - from_gradient.matrix).max() / scale < 1e-5
    assert finite.matrix.shape == (len(finite.active),) * 2


def test_hessian_rejects_unknown_method():
    with pytest.raises(ValueError):
        laplace.hessian_logF(GENERIC, 6, method='spline')


def test_gradient_matches_finite_differences():
    h = 1e-7
    gradient = laplace.gradient_logF(GENERIC, 6)
    base = GENERIC.as_array()
    for i in range(5):
        step = np.zeros(5)
        step[i] = h
        plus = laplace.log_F(RegionPoint.from_array(base + step), 6)
        minus = laplace.log_F(RegionPoint.from_array(base - step), 6)
        assert gradient[i] == pytest.approx((plus - minus) / (2 * h), rel=1e-5, abs=1e-6)


def test_alpha():
    for d in (6, 7, 10):
        x = laplace.x_max_closed_form(d)
        assert laplace.eval_alpha(x, d) == pytest.approx(laplace.alpha_closed_form(d), rel=1e-9)
    with pytest.raises(RegionError):
        laplace.alpha_closed_form(5)
    with pytest.raises(RegionError):
        laplace.eval_alpha(laplace.x_max_closed_form(4), 4)
    assert laplace.eval_alpha(laplace.x_max_closed_form(4), 4, reduced=True) > 0


@pytest.mark.parametrize("d", range(6, 11))
def test_gaussian_constant_matches_display(d):
    constant = laplace.gaussian_constant(d)
    assert constant.display_ratio == pytest.approx(512, rel=1e-6)
    assert all_passed(constant.checks)


@pytest.mark.parametrize("d", range(6, 11))
def test_finite_difference_gaussian_constant_to_1e_6(d):
    constant = laplace.gaussian_constant(d)
    assert constant.finite_difference_value == pytest.approx(constant.value, rel=1e-6)
    check = next(check for check in constant.checks if check.name == 'gaussian_constant_finite_difference')
    assert check.passed
    assert check.tolerance == laplace.GAUSSIAN_FD_TOL == 1e-6


def test_richardson_hessian_beats_plain_central_differences():
    d = 9
    x = laplace.x_max_closed_form(d)
    analytic = laplace.hessian_logF(x, d, method='analytic').matrix
    extrapolated = laplace.hessian_logF(x, d).matrix
    plain = laplace._central_hessian(x.as_array(), laplace.active_coordinates(d),
                                     laplace._steps(x, d, laplace.HESSIAN_STEP), d)
    assert np.abs(extrapolated - analytic).max() < np.abs(plain - analytic).max()


def test_gaussian_constant_reduced_degrees():
    for d in (4, 5):
        constant = laplace.gaussian_constant(d)
        assert constant.dimension == len(laplace.active_coordinates(d))
        assert constant.closed_form is None
        assert all_passed(constant.checks)


def test_gaussian_integral_scaling():
    matrix = laplace.quadratic_form_matrix(laplace.hessian_logF(laplace.x_max_closed_form(7), 7,
                                                                method='analytic').matrix)
    assert laplace.gaussian_integral(2 * matrix) == pytest.approx(laplace.gaussian_integral(matrix) * 2 ** -2.5)
    assert laplace.gaussian_integral(np.eye(2)) == pytest.approx(math.pi)
    with pytest.raises(RegionError):
        laplace.gaussian_integral(-np.eye(3))


@pytest.mark.parametrize("d", CERTIFIED)
def test_reconstructed_variance_ratio(d):
    reconstruction = laplace.reconstruct_variance_ratio(d)
    assert reconstruction.value == pytest.approx(variance_ratio(d), rel=1e-6)
    assert abs(laplace.growth_log_ratio(d)) < 1e-12
    assert all_passed(reconstruction.checks)


@pytest.mark.parametrize("d", CERTIFIED)
def test_plug_in_checks(d):
    assert all_passed(laplace.plug_in_checks(d))


def test_exploratory_degree_checks_are_advisory():
    checks = laplace.plug_in_checks(12)
    assert all_passed(checks)
    assert all('exploratory' in check.note for check in checks)


def test_boundary_scan_d4():
    report = laplace.boundary_scan(4, starts_per_face=8, seed=1)
    status = {face.face: face.status for face in report.faces}
    assert status[2] == status[5] == 'not-a-boundary'
    assert status[6] == 'empty'
    assert status[8] == status[9] == 'point'
    assert all_passed(report.checks)
    assert report.max_value < laplace.F_max_closed_form(4)


def test_boundary_scan_d6():
    report = laplace.boundary_scan(6, starts_per_face=6, seed=2)
    faces = {face.face: face for face in report.faces}
    assert faces[6].status == 'empty'
    for face in (8, 9):
        assert faces[face].location.as_tuple() == pytest.approx(laplace.C1.as_tuple(), abs=1e-12)
    assert report.c1_value == pytest.approx(22.5435772, rel=1e-8)
    assert all_passed(report.checks)


def test_simplex_starts_lie_in_region():
    starts = laplace.simplex_starts(5, 200, seed=4)
    assert starts.shape == (200, 5)
    assert starts.min() >= 0
    assert starts.sum(axis=1).max() <= 0.25 + 1e-15
    np.testing.assert_array_equal(starts, laplace.simplex_starts(5, 200, seed=4))


@pytest.mark.parametrize("d", [4, 6])
def test_find_global_max_small(d):
    report = laplace.find_global_max(d, starts=32, seed=3)
    assert all_passed(report.checks)
    assert report.face_starts == len(laplace.face_starts(d, laplace.active_coordinates(d))) > 0
    assert report.starts == 32 + len(laplace.active_coordinates(d)) + 1 + report.face_starts
    assert report.to_dict()['face_starts'] == report.face_starts
    assert report.classification == 'interior max'
    assert report.value == pytest.approx(laplace.F_max_closed_form(d), rel=1e-9)
    assert report.exceed_count == 0


def test_find_critical_points():
    sweep = laplace.find_critical_points(4, starts=60, seed=0)
    assert all_passed(sweep.checks)
    assert any(point.classification == 'interior max' for point in sweep.points)


def test_critical_point_sweep_reports_count_mismatch(caplog):
    with caplog.at_level('WARNING', logger='starfactor.laplace'):
        sweep = laplace.find_critical_points(6, starts=40, seed=0)
    assert sweep.other_interior == 0
    assert sweep.to_dict()['expected_other_interior'] == 1
    assert 'expected 1' in caplog.text
    bound, count = sweep.checks
    assert bound.name == 'critical_points_below_max'
    assert bound.value == -math.inf
    assert 'found 0 other interior critical points, expected 1' in bound.note
    assert 'vacuously' in bound.note
    assert count.name == 'other_critical_point_count'
    assert count.residual == 1
    assert count.passed and 'not exhaustive' in count.note


@pytest.mark.parametrize("d", [4, 6])
def test_face_starts_sit_just_inside_boundary_faces(d):
    active = laplace.active_coordinates(d)
    starts = laplace.face_starts(d, active)
    assert starts.shape[0] > 0 and starts.shape[1] == len(active)
    for y in starts:
        point = RegionPoint.from_active(y, active)
        assert point.in_region(d)
        assert point.face_values(d)[list(active) + [5, 6, 7, 8]].min() < 1e-5


def test_classify_boundary_point():
    assert laplace.classify(laplace.C1, 6, [-1.0]) == 'boundary'
    assert laplace.describe_point(laplace.C1, 6).classification == 'boundary'


def test_require_raises_on_failed_check():
    checks = [Check.absolute('ok', 1.0, 1.0, 1e-9), Check.absolute('off', 1.0, 2.0, 1e-9)]
    with pytest.raises(VerificationError) as excinfo:
        require(checks, 'unit')
    assert [check.name for check in excinfo.value.checks] == ['off']


def test_verify_degree_strict():
    verification = laplace.verify_degree(4, starts=24, seed=0, critical_starts=40, strict=True)
    assert verification.certified
    payload = verification.to_dict()
    assert payload['banner'] is None
    assert payload['F_x_max'] == pytest.approx(laplace.F_max_closed_form(4))
    assert all_passed(verification.checks)


@pytest.mark.slow
@pytest.mark.parametrize("d", CERTIFIED)
def test_verify_degree_full_search(d):
    verification = laplace.verify_degree(d, starts=laplace.DEFAULT_STARTS, seed=0, threads=2, strict=True)
    assert verification.global_max.starts >= laplace.DEFAULT_STARTS
    assert verification.global_max.exceed_count == 0


@pytest.mark.slow
def test_verify_exploratory_degree():
    verification = laplace.verify_degree(12, starts=16, critical_starts=20)
    assert not verification.certified
    assert verification.to_dict()['banner'].startswith('uncertified')
    assert all_passed(verification.checks)
