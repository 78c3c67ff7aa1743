import logging
from fractions import Fraction

import pytest

from starfactor import experiment
from starfactor.errors import ConfigurationError
from starfactor.experiment import ExperimentConfig, SampleSet
from starfactor.reporting import all_passed
from starfactor.theory import rel_joint_moment, variance_ratio


def small_config(**overrides):
    values = dict(n=8, d=4, samples=600, kmax=3, seed=1, bootstrap=50, z_threshold=4.5)
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.mark.parametrize("overrides", [
    {'n': 6},
    {'d': 3},
    {'mode': 'grid'},
    {'samples': 1},
    {'kmax': 0},
    {'threads': 0},
    {'bootstrap': -1},
])
def test_config_validation(overrides):
    with pytest.raises(ConfigurationError):
        small_config(**overrides).validate()


def test_measure(k4):
    assert experiment.measure(k4, 4) == (4, (0, 0, 4, 3))
    assert experiment.measure(k4, 3, count_factors=False) == (0, (0, 0, 4))


def test_monte_carlo_against_exact_theory():
    report = experiment.run(small_config())
    assert report.sample_count == 600
    assert all_passed(report.checks)
    mean_y = report.row('mean_Y')
    assert mean_y['kind'] == 'exact'
    assert mean_y['theory'] == pytest.approx(4.50775, abs=5e-6)
    assert report.variance_ratio_limit == pytest.approx(variance_ratio(4))
    assert isinstance(report.second_moment_ratio, float)
    assert set(report.to_frame()['name']) >= {'mean_Y', 'mean_Y2', 'mean_X', 'fact2_X', 'simple_fraction'}


def test_runs_are_reproducible_across_thread_counts():
    serial = experiment.run(small_config(samples=1200, threads=1))
    parallel = experiment.run(small_config(samples=1200, threads=2))
    assert serial.rows == parallel.rows
    assert serial.joint.rows == parallel.joint.rows


def test_joint_sweep_reports_bootstrap_errors():
    sweep = experiment.run(small_config()).joint
    assert not sweep.undefined
    assert sweep.bootstrap == 50
    assert len(sweep.to_frame()) == 3
    for row in sweep.rows:
        assert row['stderr'] > 0
        assert row['theory'] == pytest.approx(rel_joint_moment(4, row['k']))
    assert 'nothing here is asserted' in sweep.to_dict()['note']


def test_joint_sweep_with_no_factors():
    samples = SampleSet(y=[0, 0, 0], cycles=[(1, 0), (0, 1), (2, 2)], weights=[1, 1, 1])
    sweep = experiment.joint_moment_sweep(4, 8, 3, 2, seed=0, sample_set=samples)
    assert sweep.undefined
    assert [row['ratio'] for row in sweep.rows] == [None, None]


def test_exhaustive_weights_give_exact_ratios():
    samples = SampleSet(y=[1, 3], cycles=[(2,), (1,)], weights=[2, 5])
    sweep = experiment.joint_moment_sweep(4, 8, 0, 1, seed=0, sample_set=samples)
    assert sweep.rows[0]['ratio'] == Fraction(2 * 1 * 2 + 5 * 3 * 1, 2 * 1 + 5 * 3)
    assert sweep.rows[0]['stderr'] == 0.0
    assert sweep.bootstrap == 0


def test_factor_cap_skips_y_statistics(caplog):
    with caplog.at_level(logging.WARNING, logger='starfactor.experiment'):
        report = experiment.run(small_config(n=80, samples=40, factor_cap=64))
    assert 'exceeds the factor cap' in caplog.text
    assert report.joint is None
    assert report.checks == []
    with pytest.raises(KeyError):
        report.row('mean_Y')
    assert report.row('mean_X', 1)['kind'] == 'asymptotic'


@pytest.mark.slow
def test_exhaustive_n4_d4_is_exact():
    report = experiment.run(ExperimentConfig(n=4, d=4, mode='exhaustive', samples=0, kmax=3))
    assert report.sample_count == 2027025
    assert report.row('mean_Y')['estimate'] == Fraction(2048, 715)
    assert report.row('mean_Y2')['estimate'] == Fraction(364544, 25025)
    assert all_passed(report.checks)
    assert all(row['stderr'] == 0.0 for row in report.rows)


@pytest.mark.slow
def test_monte_carlo_acceptance_run():
    report = experiment.run(ExperimentConfig(n=16, d=4, samples=20_000, kmax=4, seed=7, threads=2))
    assert all_passed(report.checks)


@pytest.mark.slow
def test_factor_moments_at_acceptance_scale():
    report = experiment.run(ExperimentConfig(n=8, d=4, samples=100_000, kmax=3, seed=11, threads=2, bootstrap=200))
    assert report.sample_count == 100_000
    for name in ('mean_Y', 'mean_Y2'):
        row = report.row(name)
        assert row['kind'] == 'exact'
        assert abs(row['z']) < 3.0
