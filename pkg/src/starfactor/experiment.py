"""Monte Carlo and exhaustive experiments comparing pairing-model samples with theory.

Every statistic is accumulated as exact integer sums of the per-sample value
and its square, weighted by how many pairings the sample stands for (1 in
Monte Carlo mode, the projection multiplicity in exhaustive mode). Sums are
associative, so chunked parallel runs reproduce the serial result bit for bit.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import Pool
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from starfactor.cycle_census import census
from starfactor.errors import ConfigurationError
from starfactor.factor_count import count_3star_factors
from starfactor.pairing import PairingSpace, derive_seed, make_rng, project, projection_census, sample_uniform
from starfactor.reporting import Check, run_info
from starfactor.theory import (check_degree, check_order, expected_factors_exact, lambda_k, rel_joint_moment,
                               second_moment_exact, simple_probability, variance_ratio)

logger = logging.getLogger(__name__)

MODES = ('monte-carlo', 'exhaustive')
CHUNK_SIZE = 500
BOOTSTRAP_STREAM = 2 ** 63
REPORT_COLUMNS = ['name', 'k', 'estimate', 'stderr', 'theory', 'z', 'kind']


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    d: int
    samples: int = 10_000
    kmax: int = 4
    seed: int = 0
    mode: str = 'monte-carlo'
    threads: int = 1
    factor_cap: int = 64
    enumeration_cap: int = 16
    bootstrap: int = 1000
    z_threshold: float = 3.0
    progress: bool = False

    def validate(self):
        check_degree(self.d)
        check_order(self.n)
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.mode == 'monte-carlo' and self.samples < 2:
            raise ConfigurationError(f"Monte Carlo needs at least 2 samples, got {self.samples}")
        if self.kmax < 1:
            raise ConfigurationError(f"kmax must be at least 1, got {self.kmax}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be at least 1, got {self.threads}")
        if self.bootstrap < 0:
            raise ConfigurationError(f"bootstrap resamples cannot be negative, got {self.bootstrap}")
        return self

    @property
    def counts_factors(self) -> bool:
        return self.n <= self.factor_cap

    def as_dict(self) -> dict:
        return {
            'n': self.n,
            'd': self.d,
            'samples': self.samples if self.mode == 'monte-carlo' else None,
            'kmax': self.kmax,
            'seed': self.seed,
            'mode': self.mode,
            'threads': self.threads,
            'factor_cap': self.factor_cap,
            'enumeration_cap': self.enumeration_cap,
            'bootstrap': self.bootstrap,
            'z_threshold': self.z_threshold,
        }


def measure(graph, kmax: int, count_factors: bool = True) -> tuple:
    """(Y*, (X_1, ..., X_kmax)) of one projected multigraph"""
    y = count_3star_factors(graph) if count_factors else 0
    return y, census(graph, kmax).counts


def _sample_chunk(task):
    n, d, kmax, seed, start, stop, count_factors = task
    space = PairingSpace(n, d)
    measured = []
    for index in range(start, stop):
        graph = project(space, sample_uniform(space, derive_seed(seed, index)))
        measured.append(measure(graph, kmax, count_factors))
    return measured


@dataclass
class SampleSet:
    """Per-sample factor counts and cycle censuses with pairing weights"""
    y: list
    cycles: list
    weights: list
    counted_factors: bool = True

    def __len__(self):
        return len(self.y)

    @property
    def total_weight(self) -> int:
        return sum(self.weights)


def _statistics(kmax: int, count_factors: bool) -> list:
    """(name, k, per-sample value) definitions reported by an experiment"""
    stats = []
    if count_factors:
        stats.append(('mean_Y', None, lambda y, x: y))
        stats.append(('mean_Y2', None, lambda y, x: y * y))
    for k in range(1, kmax + 1):
        stats.append(('mean_X', k, lambda y, x, k=k: x[k - 1]))
        stats.append(('fact2_X', k, lambda y, x, k=k: x[k - 1] * (x[k - 1] - 1)))
        if count_factors:
            stats.append(('mean_YX', k, lambda y, x, k=k: y * x[k - 1]))
            stats.append(('mean_Y_fact2_X', k, lambda y, x, k=k: y * x[k - 1] * (x[k - 1] - 1)))
    if kmax >= 2:
        stats.append(('simple_fraction', None, lambda y, x: int(x[0] == 0 and x[1] == 0)))
    return stats


def _theory(name, k, n, d):
    """Theory value and whether it is exact at this n"""
    if name == 'mean_Y':
        return expected_factors_exact(n, d), 'exact'
    if name == 'mean_Y2':
        return second_moment_exact(n, d), 'exact'
    if name == 'mean_X':
        return lambda_k(d, k), 'asymptotic'
    if name == 'fact2_X':
        return lambda_k(d, k) ** 2, 'asymptotic'
    if name == 'mean_YX':
        return rel_joint_moment(d, k) * float(expected_factors_exact(n, d)), 'asymptotic'
    if name == 'mean_Y_fact2_X':
        return rel_joint_moment(d, k) ** 2 * float(expected_factors_exact(n, d)), 'asymptotic'
    if name == 'simple_fraction':
        return simple_probability(d), 'asymptotic'
    raise KeyError(name)


@dataclass
class JointMomentSweep:
    d: int
    n: int
    rows: list
    undefined: bool
    bootstrap: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=['k', 'ratio', 'stderr', 'theory', 'z'])

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'n': self.n,
            'undefined_ratio': self.undefined,
            'bootstrap_resamples': self.bootstrap,
            'note': 'asymptotic comparison; finite-n bias is not controlled, so nothing here is asserted',
            'rows': self.rows,
        }


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    sample_count: int
    checks: list
    second_moment_ratio: object = None
    second_moment_ratio_theory: object = None
    variance_ratio_limit: Optional[float] = None
    joint: Optional[JointMomentSweep] = None
    run_info: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    def row(self, name, k=None) -> dict:
        for row in self.rows:
            if row['name'] == name and row['k'] == k:
                return row
        raise KeyError(f"no statistic {name} with k={k}")

    def to_dict(self) -> dict:
        return {
            'config': self.config.as_dict(),
            'sample_count': self.sample_count,
            'statistics': self.rows,
            'second_moment_ratio': self.second_moment_ratio,
            'second_moment_ratio_theory': self.second_moment_ratio_theory,
            'variance_ratio_limit': self.variance_ratio_limit,
            'joint_moments': self.joint.to_dict() if self.joint is not None else None,
            'checks': self.checks,
            'run_info': self.run_info,
        }


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig):
        self.config = config.validate()
        self.logger = logging.getLogger(__name__)

    def draw_samples(self) -> SampleSet:
        config = self.config
        if not config.counts_factors:
            self.logger.warning(f"n={config.n} exceeds the factor cap {config.factor_cap}; Y* statistics are skipped")
        if config.mode == 'exhaustive':
            return self._enumerate()
        return self._sample()

    def _sample(self) -> SampleSet:
        config = self.config
        bounds = list(range(0, config.samples, CHUNK_SIZE)) + [config.samples]
        tasks = [(config.n, config.d, config.kmax, config.seed, start, stop, config.counts_factors)
                 for start, stop in zip(bounds[:-1], bounds[1:])]
        measured = []
        progress = tqdm(total=config.samples, desc=f"Sampling n={config.n} d={config.d}", disable=not config.progress)
        if config.threads > 1:
            with Pool(processes=config.threads) as pool:
                for chunk in pool.imap(_sample_chunk, tasks):
                    measured.extend(chunk)
                    progress.update(len(chunk))
        else:
            for task in tasks:
                chunk = _sample_chunk(task)
                measured.extend(chunk)
                progress.update(len(chunk))
        progress.close()
        self.logger.info(f"Processed {len(measured):,} samples")
        return SampleSet(y=[y for y, _ in measured], cycles=[x for _, x in measured],
                         weights=[1] * len(measured), counted_factors=config.counts_factors)

    def _enumerate(self) -> SampleSet:
        config = self.config
        space = PairingSpace(config.n, config.d)
        graphs = projection_census(space, cap=config.enumeration_cap, progress=config.progress)
        y, cycles, weights = [], [], []
        # Counter order follows first appearance in the enumeration, which is fixed
        for graph, count in graphs.items():
            value, counts = measure(graph, config.kmax, config.counts_factors)
            y.append(value)
            cycles.append(counts)
            weights.append(count)
        self.logger.info(f"Processed {sum(weights):,} pairings over {len(weights):,} multigraphs")
        return SampleSet(y=y, cycles=cycles, weights=weights, counted_factors=config.counts_factors)

    def summarize(self, samples: SampleSet) -> list:
        config = self.config
        exhaustive = config.mode == 'exhaustive'
        total = samples.total_weight
        definitions = _statistics(config.kmax, samples.counted_factors)
        first = [0] * len(definitions)
        second = [0] * len(definitions)
        for y, x, w in zip(samples.y, samples.cycles, samples.weights):
            for i, (_, _, value) in enumerate(definitions):
                v = value(y, x)
                first[i] += w * v
                second[i] += w * v * v
        rows = []
        for (name, k, _), s1, s2 in zip(definitions, first, second):
            estimate = Fraction(s1, total)
            if exhaustive:
                stderr = 0.0
            else:
                variance = (Fraction(s2) - Fraction(s1 * s1, total)) / (total - 1)
                stderr = math.sqrt(float(variance) / total)
            theory, kind = _theory(name, k, config.n, config.d)
            if stderr > 0:
                z = (float(estimate) - float(theory)) / stderr
            else:
                z = None
            rows.append({
                'name': name,
                'k': k,
                'estimate': estimate if exhaustive else float(estimate),
                'stderr': stderr,
                'theory': theory if kind == 'exact' else float(theory),
                'z': z,
                'kind': kind,
            })
        return rows

    def checks(self, rows: list) -> list:
        checks = []
        for row in rows:
            if row['kind'] != 'exact':
                continue
            label = row['name'] if row['k'] is None else f"{row['name']}_{row['k']}"
            if self.config.mode == 'exhaustive':
                checks.append(Check.exact(label, row['estimate'], row['theory'], note='exhaustive enumeration'))
            elif row['z'] is None:
                checks.append(Check.absolute(label, row['estimate'], float(row['theory']), 1e-12,
                                             note='zero sample variance'))
            else:
                checks.append(Check.below(f"{label}_z", abs(row['z']), self.config.z_threshold,
                                          note=f"|z| against exact theory, threshold {self.config.z_threshold}"))
        return checks

    def run(self) -> ExperimentReport:
        started = time.perf_counter()
        config = self.config
        self.logger.info(f"Running {config.mode} experiment: {config.as_dict()}")
        samples = self.draw_samples()
        rows = self.summarize(samples)
        checks = self.checks(rows)
        report = ExperimentReport(config=config, rows=rows, sample_count=samples.total_weight, checks=checks)
        if samples.counted_factors:
            mean_y = next(row for row in rows if row['name'] == 'mean_Y')
            mean_y2 = next(row for row in rows if row['name'] == 'mean_Y2')
            if mean_y['estimate']:
                ratio = Fraction(mean_y2['estimate']) / Fraction(mean_y['estimate']) ** 2
                report.second_moment_ratio = ratio if config.mode == 'exhaustive' else float(ratio)
            report.second_moment_ratio_theory = mean_y2['theory'] / mean_y['theory'] ** 2
            report.variance_ratio_limit = variance_ratio(config.d)
            report.joint = joint_moment_sweep(config.d, config.n, config.samples, config.kmax, config.seed,
                                              bootstrap=config.bootstrap, sample_set=samples)
        report.run_info = run_info(started)
        failures = [check.name for check in checks if not check.passed]
        if failures:
            self.logger.warning(f"Experiment checks failed: {', '.join(failures)}")
        return report


def run(config: ExperimentConfig) -> ExperimentReport:
    return ExperimentRunner(config).run()


def joint_moment_sweep(d, n, samples, kmax, seed, bootstrap: int = 1000, threads: int = 1,
                       sample_set: Optional[SampleSet] = None, progress: bool = False) -> JointMomentSweep:
    """E(Y* X_k) / E Y* per k beside lambda_k (1 + delta_k), with bootstrap standard errors"""
    if sample_set is None:
        config = ExperimentConfig(n=n, d=d, samples=samples, kmax=kmax, seed=seed, threads=threads,
                                  bootstrap=bootstrap, progress=progress)
        sample_set = ExperimentRunner(config).draw_samples()
    if not sample_set.counted_factors:
        raise ConfigurationError(f"joint moments need Y*, which was not counted for n={n}")
    weights = sample_set.weights
    total_y = sum(w * y for w, y in zip(weights, sample_set.y))
    rows = []
    if total_y == 0:
        logger.warning(f"Every sample has Y* = 0 (n={n}, d={d}); the joint-moment ratio is undefined")
        for k in range(1, kmax + 1):
            rows.append({'k': k, 'ratio': None, 'stderr': None, 'theory': rel_joint_moment(d, k), 'z': None})
        return JointMomentSweep(d=d, n=n, rows=rows, undefined=True, bootstrap=0)

    weighted_sums = [sum(w * y * x[k - 1] for w, y, x in zip(weights, sample_set.y, sample_set.cycles))
                     for k in range(1, kmax + 1)]
    resampled = None
    exhaustive = any(w != 1 for w in weights)
    if bootstrap and not exhaustive and len(sample_set) > 1:
        y = np.array(sample_set.y, dtype=float)
        yx = y[:, None] * np.array(sample_set.cycles, dtype=float)[:, :kmax]
        rng = make_rng(derive_seed(seed, BOOTSTRAP_STREAM))
        ratios = []
        for _ in range(bootstrap):
            chosen = rng.integers(0, len(y), size=len(y))
            denominator = y[chosen].sum()
            ratios.append(yx[chosen].sum(axis=0) / denominator if denominator else np.full(kmax, np.nan))
        resampled = np.array(ratios)
    for k in range(1, kmax + 1):
        ratio = Fraction(weighted_sums[k - 1], total_y)
        theory = rel_joint_moment(d, k)
        stderr = float(np.nanstd(resampled[:, k - 1], ddof=1)) if resampled is not None else 0.0
        z = (float(ratio) - theory) / stderr if stderr > 0 else None
        rows.append({'k': k, 'ratio': ratio if exhaustive else float(ratio), 'stderr': stderr, 'theory': theory, 'z': z})
    return JointMomentSweep(d=d, n=n, rows=rows, undefined=False, bootstrap=0 if resampled is None else bootstrap)
