"""Closed-form constants for 3-star factors in random d-regular graphs.

Cycle parameters are lambda_k = (d-1)^k / 2k and delta_k = 2 Re(z^k), where z
and its conjugate are the roots appearing in the joint moments of the factor
count with the k-cycle count. z is complex for every d >= 4, so all delta and
eigenvalue work is done in complex arithmetic. Finite-n expectations are exact
rationals; asymptotic constants are binary64.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
import pandas as pd

from starfactor.errors import ConfigurationError, SizeExplosionError
from starfactor.pairing import make_rng, matchings_count
from starfactor.reporting import Check

logger = logging.getLogger(__name__)

MIN_DEGREE = 4
CERTIFIED_DEGREES = range(4, 11)
POISSON_LAMBDA_LIMIT = 1e15
W_CHUNK = 100_000
WALK_LENGTH_CAP = 14
DELTA_POSITIVITY_TERMS = 200


def check_degree(d):
    if int(d) != d or d < MIN_DEGREE:
        raise ConfigurationError(f"degree must be an integer >= {MIN_DEGREE}, got {d}")
    return int(d)


def check_order(n):
    if int(n) != n or n < 4 or n % 4:
        raise ConfigurationError(f"a 3-star factor needs n divisible by 4, got n={n}")
    return int(n)


def is_certified(d) -> bool:
    return d in CERTIFIED_DEGREES


def _check_k(k):
    if int(k) != k or k < 1:
        raise ValueError(f"cycle length must be a positive integer, got {k}")


def lambda_k(d, k) -> float:
    _check_k(k)
    return (d - 1) ** k / (2 * k)


def cycle_base(d) -> complex:
    """z = (-3(d-2) + i sqrt(15d^2 - 24d)) / (4(d-1)(d-3/2))"""
    return complex(-3 * (d - 2), math.sqrt(15 * d * d - 24 * d)) / (4 * (d - 1) * (d - 1.5))


def delta_k(d, k) -> float:
    _check_k(k)
    return 2 * (cycle_base(d) ** k).real


def delta_decay(d) -> float:
    """|z|, so that |delta_k| <= 2 |z|^k"""
    return math.sqrt(3 / (2 * (d - 1) * (d - 1.5)))


def tail_ratio(d) -> float:
    """(d-1)|z|^2 = 3/(2d-3), the geometric ratio of lambda_k delta_k^2"""
    return 3 / (2 * d - 3)


def rel_joint_moment(d, k) -> float:
    """E(Y* X_k)/E Y* in the limit, from the rooted-oriented cycle sum"""
    _check_k(k)
    w = (d - 1) * cycle_base(d)
    return ((d - 1) ** k + 2 * (w ** k).real) / (2 * k)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    d: int
    matrix: np.ndarray
    eigenvalues: tuple

    @property
    def scale(self) -> float:
        return transfer_scale(self.d)

    def trace_power(self, k: int) -> float:
        return float(np.trace(np.linalg.matrix_power(self.matrix, k)))

    def eigen_trace(self, k: int) -> float:
        gamma1, gamma2, _ = self.eigenvalues
        return gamma1.real ** k + 2 * (gamma2 ** k).real

    def numeric_eigenvalues(self) -> np.ndarray:
        values = np.linalg.eigvals(self.matrix)
        return values[np.lexsort((values.imag, -values.real))]

    def to_dict(self) -> dict:
        return {'d': self.d, 'matrix': self.matrix, 'eigenvalues': list(self.eigenvalues)}


def transfer_matrix(d) -> TransferMatrix:
    """Three-state transfer matrix of a cycle walking along a 3-star factor"""
    d = check_degree(d)
    h = d - 1.5
    matrix = np.array([
        [1 + (d - 3) * (d - 4) / (3 * (d - 1) * (d - 2)), 1.0, 0.0],
        [8 * h * (d - 3) / (3 * (d - 1) * (d - 2) ** 2), 0.0, 32 * h * h / (9 * (d - 1) * (d - 2) ** 3)],
        [1.0, 0.0, 0.0],
    ])
    gamma1 = complex(4 * h / (3 * (d - 2)), 0.0)
    gamma2 = complex(-3 * (d - 2), math.sqrt(15 * d * d - 24 * d)) / (3 * (d - 1) * (d - 2))
    return TransferMatrix(d=d, matrix=matrix, eigenvalues=(gamma1, gamma2, gamma2.conjugate()))


def transfer_scale(d) -> float:
    """Factor turning gamma_1 into d - 1"""
    return 3 * (d - 1) * (d - 2) / (4 * (d - 1.5))


def rel_joint_moment_transfer(d, k) -> float:
    _check_k(k)
    transfer = transfer_matrix(d)
    return transfer.scale ** k * transfer.trace_power(k) / (2 * k)


def trace_by_walks(d, k) -> float:
    """tr(A^k) as an explicit sum over closed state sequences"""
    _check_k(k)
    if k > WALK_LENGTH_CAP:
        raise SizeExplosionError(f"walk expansion limited to k <= {WALK_LENGTH_CAP}, got {k}",
                                 size=k, cap=WALK_LENGTH_CAP)
    matrix = transfer_matrix(d).matrix.tolist()
    total = 0.0
    for states in product(range(3), repeat=k):
        weight = 1.0
        for i in range(k):
            weight *= matrix[states[i]][states[(i + 1) % k]]
            if weight == 0.0:
                break
        total += weight
    return total


def factor_incidences(n, d) -> int:
    """Number of (pairing, 3-star factor) incidences on d*n points"""
    n = check_order(n)
    if d < 3:
        return 0
    stars = n // 4
    per_star = d ** 4 * (d - 1) * (d - 2) // 6
    free_points = n * (2 * d - 3) // 2
    return (math.factorial(n) // math.factorial(stars)) * per_star ** stars * matchings_count(free_points // 2)


def expected_factors_exact(n, d) -> Fraction:
    """E Y* over uniform pairings, as an exact rational"""
    d = check_degree(d)
    n = check_order(n)
    return Fraction(factor_incidences(n, d), matchings_count(n * d // 2))


def expectation_base(d) -> float:
    """Per-vertex growth rate b with E Y* ~ 2 b^n"""
    d = check_degree(d)
    log_base = (math.log(d) + (d / 2 - 0.75) * math.log(d - 1.5)
                + 0.5 * (math.log(2) - d * math.log(d))
                + 0.25 * math.log((d - 1) * (d - 2) / 6))
    return math.exp(log_base)


def expected_factors_asymptotic(n, d) -> float:
    d = check_degree(d)
    n = check_order(n)
    return 2 * math.exp(n * math.log(expectation_base(d)))


def variance_ratio(d) -> float:
    """Limit of E Y*^2 / (E Y*)^2"""
    d = check_degree(d)
    if not is_certified(d):
        logger.debug(f"variance_ratio({d}) is outside the certified range 4..10")
    return 2 * math.sqrt(d - 1) * (d - 1.5) ** 2 / ((d - 3) * math.sqrt(4 * d ** 3 - 13 * d ** 2 + 36 * d - 36))


def second_moment_exact(n, d) -> Fraction:
    """E Y*^2 as an exact rational, summed over the overlap pattern of two factors.

    x1..x5 count the five ways a star of the second factor can share edges with
    the first one; terms carrying (d-4) or (d-5) vanish for d = 4, 5.
    """
    d = check_degree(d)
    n = check_order(n)
    m = n // 4
    fact = math.factorial
    total = Fraction(0)
    for x1 in range(m + 1):
        for x2 in range(m + 1 - x1):
            if d == 4 and x2:
                break
            for x3 in range(m + 1 - x1 - x2):
                for x4 in range(m + 1 - x1 - x2 - x3):
                    for x5 in range(m + 1 - x1 - x2 - x3 - x4):
                        if (d == 4 or d == 5) and x5:
                            break
                        a = 3 * n // 4 - x1 - x2 - 2 * x3 - 3 * x4
                        b = m - x1 - x2 - x3 - x4 - x5
                        c = n // 2 - x3 - 2 * x4 + x5
                        free = (d - 3) * n + 2 * x1 + 2 * x2 + 4 * x3 + 6 * x4
                        numerator = (fact(a) ** 2 * 3 ** (2 * x1 + 2 * x2 + 2 * x3 + x4) * fact(free)
                                     * (d - 4) ** (x2 + x5) * (d - 5) ** x5)
                        denominator = (fact(b) ** 2 * fact(c) * 2 ** (x1 + x2 + x3 + 2 * x4)
                                       * fact(x1) * fact(x2) * fact(x3) * fact(x4) * fact(x5)
                                       * fact(free // 2)
                                       * (d - 1) ** (x2 + 2 * x3 + 3 * x4)
                                       * (d - 2) ** (x2 + x3 + x4 + x5)
                                       * (d - 3) ** (2 * x1 + x2 + x3 + 2 * x4 + x5))
                        total += Fraction(numerator, denominator)
    prefactor = (Fraction(fact(n) * fact(n * d // 2), fact(n * d))
                 * Fraction(4 * (d - 2) * (d - 3), 3) ** (n // 2)
                 * (d * (d - 1)) ** n)
    return prefactor * total


def second_moment_ratio_exact(n, d) -> Fraction:
    return second_moment_exact(n, d) / expected_factors_exact(n, d) ** 2


@dataclass(frozen=True)
class SeriesSum:
    value: float
    terms: int
    tail_bound: float


def lambda_delta_series(d, tol=1e-7, kmin=1, delta=delta_k) -> SeriesSum:
    """Sum of lambda_k delta_k^2 for k >= kmin until the geometric tail drops below tol/10"""
    d = check_degree(d)
    ratio = tail_ratio(d)
    total = 0.0
    k = kmin
    while True:
        total += lambda_k(d, k) * delta(d, k) ** 2
        tail = 2 / (k + 1) * ratio ** (k + 1) / (1 - ratio)
        if tail < tol / 10:
            return SeriesSum(value=total, terms=k - kmin + 1, tail_bound=tail)
        k += 1


def delta_positivity_checks(d, terms=DELTA_POSITIVITY_TERMS) -> list:
    rho = delta_decay(d)
    worst = min(1 + delta_k(d, k) for k in range(1, terms + 1))
    bound_ok = all(abs(delta_k(d, k)) <= 2 * rho ** k * (1 + 1e-12) for k in range(1, terms + 1))
    first = -3 * (d - 2) / (2 * (d - 1) * (d - 1.5))
    return [
        Check.below('one_plus_delta_positive', -worst, 0.0, note=f"min over k <= {terms} of 1 + delta_k"),
        Check.flag('delta_geometric_bound', bound_ok and rho < 1, note=f"|delta_k| <= 2 rho^k, rho = {rho:.6g}"),
        Check.relative('delta_1_closed_form', delta_k(d, 1), first, 1e-12),
        Check.below('delta_1_above_minus_one', -first, 1.0),
    ]


def moment_identity_check(d, tol=1e-7) -> list:
    """Compare the series for ln E W^2 with the log of the closed-form variance ratio"""
    d = check_degree(d)
    series = lambda_delta_series(d, tol)
    reference = math.log(variance_ratio(d))
    check = Check.absolute('moment_identity', series.value, reference, tol,
                           note=f"{series.terms} terms, tail bound {series.tail_bound:.2e}")
    if not check.passed:
        logger.warning(f"Moment identity failed for d={d}: series {series.value!r} vs ln R {reference!r}")
    return [check]


@dataclass(frozen=True)
class SimpleModelConstants:
    d: int
    mean_ratio: float
    second_moment_ratio: float
    prefactor_exponent: float
    removed_terms: float

    @property
    def identity_residual(self) -> float:
        return self.prefactor_exponent + self.removed_terms

    def checks(self, tol=1e-10) -> list:
        lambda_delta = lambda_k(self.d, 1) * delta_k(self.d, 1) + lambda_k(self.d, 2) * delta_k(self.d, 2)
        return [
            Check.absolute('simple_prefactor_identity', self.prefactor_exponent, -self.removed_terms, tol,
                           note='exponential prefactor vs -(lambda_1 delta_1^2 + lambda_2 delta_2^2)'),
            Check.absolute('simple_mean_identity', math.log(self.mean_ratio), -lambda_delta, tol,
                           note='log mean ratio vs -(lambda_1 delta_1 + lambda_2 delta_2)'),
        ]


def simple_model_constants(d) -> SimpleModelConstants:
    """Limits of E Y/E Y* and E Y^2/(E Y)^2 for simple graphs"""
    d = check_degree(d)
    mean_ratio = math.exp(3 * (5 * d * d - 12 * d + 6) / (4 * (2 * d - 3) ** 2))
    polynomial = 8 * d ** 5 - 63 * d ** 4 + 206 * d ** 3 - 322 * d ** 2 + 216 * d - 36
    exponent = -9 * polynomial / (4 * (2 * d - 3) ** 4 * (d - 1) ** 2)
    removed = sum(lambda_k(d, k) * delta_k(d, k) ** 2 for k in (1, 2))
    return SimpleModelConstants(
        d=d,
        mean_ratio=mean_ratio,
        second_moment_ratio=math.exp(exponent) * variance_ratio(d),
        prefactor_exponent=exponent,
        removed_terms=removed,
    )


def simple_probability(d) -> float:
    """Limiting probability that the projected pseudograph has no loops or multiple edges"""
    return math.exp(-lambda_k(d, 1) - lambda_k(d, 2))


def joint_factorial_moment(d, js) -> float:
    """Limit of E(Y* [X_1]_{j_1} ... [X_m]_{j_m}) / E Y*; js[i] is the order for k = i + 1"""
    result = 1.0
    for k, j in enumerate(js, start=1):
        if j:
            result *= (lambda_k(d, k) * (1 + delta_k(d, k))) ** j
    return result


def poisson_factorial_moment(d, js) -> float:
    """Limit of E([X_1]_{j_1} ... [X_m]_{j_m}) for independent Poisson cycle counts"""
    result = 1.0
    for k, j in enumerate(js, start=1):
        if j:
            result *= lambda_k(d, k) ** j
    return result


def transfer_checks(d, kmax=20, joint_kmax=50) -> list:
    transfer = transfer_matrix(d)
    gamma1, gamma2, gamma3 = transfer.eigenvalues
    trace_error = max(abs(transfer.trace_power(k) - transfer.eigen_trace(k)) / abs(transfer.eigen_trace(k))
                      for k in range(1, kmax + 1))
    joint_error = max(abs(rel_joint_moment(d, k) - lambda_k(d, k) * (1 + delta_k(d, k)))
                      / abs(lambda_k(d, k) * (1 + delta_k(d, k))) for k in range(1, joint_kmax + 1))
    chain_error = max(abs(rel_joint_moment_transfer(d, k) - rel_joint_moment(d, k)) / abs(rel_joint_moment(d, k))
                      for k in range(1, kmax + 1))
    walks = min(kmax, 8)
    walk_error = max(abs(trace_by_walks(d, k) - transfer.trace_power(k)) / abs(transfer.trace_power(k))
                     for k in range(1, walks + 1))
    return [
        Check.absolute('transfer_trace_eigenvalues', float(np.trace(transfer.matrix)),
                       (gamma1 + gamma2 + gamma3).real, 1e-12),
        Check.absolute('transfer_scale_identity', transfer.scale * gamma1.real, d - 1, 1e-12),
        Check.below('transfer_power_traces', trace_error, 1e-9, note=f"max relative error, k <= {kmax}"),
        Check.below('rel_joint_moment_identity', joint_error, 1e-10, note=f"max relative error, k <= {joint_kmax}"),
        Check.below('rel_joint_moment_transfer_chain', chain_error, 1e-9, note=f"max relative error, k <= {kmax}"),
        Check.below('trace_walk_expansion', walk_error, 1e-12, note=f"max relative error, k <= {walks}"),
    ]


@dataclass
class MomentConstants:
    d: int
    kmax: int
    lambdas: list
    deltas: list
    variance_ratio: float
    expectation_base: float
    mean_ratio: float
    second_moment_ratio: float
    identity_residuals: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return is_certified(self.d)

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'certified': self.certified,
            'lambda': self.lambdas,
            'delta': self.deltas,
            'variance_ratio': self.variance_ratio,
            'expectation_base': self.expectation_base,
            'mean_ratio': self.mean_ratio,
            'second_moment_ratio': self.second_moment_ratio,
            'identity_residuals': self.identity_residuals,
        }

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, (lam, delta) in enumerate(zip(self.lambdas, self.deltas), start=1):
            rows.append({
                'k': k,
                'lambda': lam,
                'delta': delta,
                'rel_joint_moment': rel_joint_moment(self.d, k),
                'lambda_delta_sq': lam * delta * delta,
            })
        return pd.DataFrame(rows)


def moment_constants(d, kmax=10, tol=1e-7) -> MomentConstants:
    d = check_degree(d)
    series = lambda_delta_series(d, tol)
    simple = simple_model_constants(d)
    checks = (moment_identity_check(d, tol) + simple.checks() + transfer_checks(d)
              + delta_positivity_checks(d) + [Check.below('variance_ratio_above_one', -variance_ratio(d), -1.0)])
    by_name = {check.name: check for check in checks}
    residuals = {
        'moment_identity': series.value - math.log(variance_ratio(d)),
        'simple_prefactor': simple.identity_residual,
        'simple_mean': by_name['simple_mean_identity'].residual,
        'transfer_power_traces': by_name['transfer_power_traces'].value,
        'rel_joint_moment': by_name['rel_joint_moment_identity'].value,
    }
    logger.info(f"Computed moment constants for d={d} ({sum(c.passed for c in checks)}/{len(checks)} checks passed)")
    return MomentConstants(
        d=d,
        kmax=kmax,
        lambdas=[lambda_k(d, k) for k in range(1, kmax + 1)],
        deltas=[delta_k(d, k) for k in range(1, kmax + 1)],
        variance_ratio=variance_ratio(d),
        expectation_base=expectation_base(d),
        mean_ratio=simple.mean_ratio,
        second_moment_ratio=simple.second_moment_ratio,
        identity_residuals=residuals,
        checks=checks,
    )


def _w_parameters(d, kmin, kmax):
    d = check_degree(d)
    if not 1 <= kmin <= kmax:
        raise ValueError(f"need 1 <= kmin <= kmax, got kmin={kmin}, kmax={kmax}")
    lambdas = np.array([lambda_k(d, k) for k in range(kmin, kmax + 1)])
    deltas = np.array([delta_k(d, k) for k in range(kmin, kmax + 1)])
    if lambdas.max() > POISSON_LAMBDA_LIMIT:
        raise ConfigurationError(
            f"lambda_{kmax} = {lambdas.max():.3g} exceeds the Poisson sampling limit "
            f"{POISSON_LAMBDA_LIMIT:.0e}; lower kmax")
    return lambdas, deltas


def sample_W_batch(d, kmin, kmax, size, seed) -> np.ndarray:
    """``size`` independent draws of prod_k (1 + delta_k)^{Z_k} exp(-lambda_k delta_k)"""
    lambdas, deltas = _w_parameters(d, kmin, kmax)
    rng = make_rng(seed)
    correction = np.log1p(deltas) - deltas
    draws = []
    for start in range(0, size, W_CHUNK):
        counts = rng.poisson(lambdas, size=(min(W_CHUNK, size - start), len(lambdas)))
        # (Z - lambda) delta keeps precision when lambda_k is huge and delta_k tiny
        log_w = ((counts - lambdas) * deltas + counts * correction).sum(axis=1)
        draws.append(np.exp(log_w))
    return np.concatenate(draws) if draws else np.empty(0)


def sample_W(d, kmin, kmax, seed) -> float:
    return float(sample_W_batch(d, kmin, kmax, 1, seed)[0])


def w_truncation_bound(d, kmax) -> float:
    """Geometric bound on the E W^2 terms dropped above kmax"""
    ratio = tail_ratio(d)
    return ratio ** (kmax + 1) / (1 - ratio)


def w_second_moment(d, kmin, kmax) -> float:
    """E W^2 for the product truncated to kmin..kmax"""
    return math.exp(sum(lambda_k(d, k) * delta_k(d, k) ** 2 for k in range(kmin, kmax + 1)))
