"""Level-occupancy model of epidemic dissemination with cellular injections.

The dissemination state is the number of nodes holding the chunk (the
*level*).  Opportunistic contacts move level ``i`` to ``i + 1`` at rate
``lambda_i = i (N - i) mu``; cellular injections are instantaneous jumps.

Injection strategies are described by the set of levels *reached* through a
cellular copy: ``c in C`` means that whenever the process sits at level
``c - 1`` a copy is pushed and the process jumps to ``c``.  Level 1 is always
in ``C`` (the copy sent at time zero), so ``C = {1, ..., d}`` is the plain
"``d`` seeds at the start" strategy.  Levels ``c - 1`` for ``c in C`` are
never occupied.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "ChainParams",
    "InjectionStrategy",
    "LevelDistribution",
    "LoadReport",
    "ResidueConditioningError",
    "solve_levels_ode",
    "solve_levels_residue",
    "expected_load",
    "gain",
    "optimal_seed_count",
    "best_strategy_bruteforce",
    "linearized_plant_gain",
]

# ODE tolerances; the contracted system is linear and non-stiff.
_RTOL = 1e-10
_ATOL = 1e-12
# negatives above -_NEG_CLAMP are integration noise (atol accumulates over steps)
_NEG_CLAMP = 1e-9
_MAX_RESIDUE_N = 64
_MAX_ENUMERATION_N = 12


class ResidueConditioningError(ArithmeticError):
    """The closed-form residue sum cannot be evaluated reliably."""


@dataclass(frozen=True)
class ChainParams:
    """Homogenised chain parameters.

    Attributes
    ----------
    n : int
        Number of nodes ``N``.
    mean_rate : float
        Mean pairwise contact rate ``mu`` in contacts per second.
    deadline : float
        Chunk deadline ``T_c`` in seconds.
    """

    n: int
    mean_rate: float
    deadline: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n}")
        if not self.mean_rate >= 0:
            raise ValueError(f"mean_rate must be >= 0, got {self.mean_rate}")
        if not self.deadline >= 0:
            raise ValueError(f"deadline must be >= 0, got {self.deadline}")

    def level_weight(self, i: int) -> int:
        """Integer factor ``i (N - i)`` of the rate out of level ``i``."""
        return i * (self.n - i)

    def level_rate(self, i: int) -> float:
        return self.level_weight(i) * self.mean_rate

    def with_deadline(self, deadline: float) -> "ChainParams":
        return ChainParams(self.n, self.mean_rate, deadline)


@dataclass(frozen=True)
class InjectionStrategy:
    """Sorted set of levels reached through cellular injections."""

    levels: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(int(c) for c in self.levels)
        if not levels:
            raise ValueError("injection strategy must be non-empty")
        if levels[0] != 1:
            raise ValueError("level 1 (the initial copy) must be injected")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be strictly increasing: {levels}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def prefix(cls, d: int) -> "InjectionStrategy":
        """``d`` seed copies at time zero and nothing else."""
        if d < 1:
            raise ValueError(f"need at least one seed, got {d}")
        return cls(tuple(range(1, d + 1)))

    @property
    def size(self) -> int:
        return len(self.levels)

    def is_prefix(self) -> bool:
        return self.levels[-1] == len(self.levels)

    def validate_for(self, n: int) -> None:
        # seeding every node (prefix of size N) is the only way to reach level N
        top = self.levels[-1]
        if top > n or (top == n and not self.is_prefix()):
            raise ValueError(f"levels must lie in 1..{n - 1} for N={n}")

    def pass_through(self) -> frozenset[int]:
        """Levels that are left instantly by an injection."""
        return frozenset(c - 1 for c in self.levels if c >= 2)

    def copies_until(self, level: int) -> int:
        """Cellular copies sent by the time ``level`` is occupied."""
        return sum(1 for c in self.levels if c <= level)


@dataclass(frozen=True)
class LevelDistribution:
    """Probabilities ``p_1..p_N`` of the level at time ``t``.

    ``probs[i - 1]`` is the probability of level ``i``.
    """

    t: float
    probs: np.ndarray

    def __getitem__(self, level: int) -> float:
        return float(self.probs[level - 1])

    @property
    def n(self) -> int:
        return len(self.probs)

    def mean_level(self) -> float:
        return float(np.dot(np.arange(1, self.n + 1), self.probs))


@dataclass(frozen=True)
class LoadReport:
    """Expected cellular load of a strategy.

    ``expected_load = expected_injected_copies + expected_panic_copies``;
    for prefix strategies ``expected_injected_copies == initial_copies``.
    """

    expected_load: float
    initial_copies: int
    expected_injected_copies: float
    expected_panic_copies: float
    level_distribution_at_deadline: LevelDistribution


def _occupiable_levels(n: int, strategy: InjectionStrategy) -> list[int]:
    strategy.validate_for(n)
    skip = strategy.pass_through()
    start = 1
    while start in skip:
        start += 1
    return [lvl for lvl in range(start, n + 1) if lvl not in skip]


def _initial_distribution(n: int, levels: list[int], t: float) -> LevelDistribution:
    probs = np.zeros(n)
    probs[levels[0] - 1] = 1.0
    return LevelDistribution(t, probs)


def _finish(n: int, levels: list[int], values: np.ndarray, t: float) -> LevelDistribution:
    values = np.where(values < 0, np.where(values > -_NEG_CLAMP, 0.0, values), values)
    probs = np.zeros(n)
    probs[np.asarray(levels) - 1] = values
    return LevelDistribution(t, probs)


def solve_levels_ode(params: ChainParams, strategy: InjectionStrategy, t: float) -> LevelDistribution:
    """Integrate the forward equations of the contracted birth chain.

    Pass-through levels are removed from the state space and their inflow is
    routed to the next occupiable level, so no artificial stiff rates appear.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    n = params.n
    levels = _occupiable_levels(n, strategy)
    if t == 0 or params.mean_rate == 0 or len(levels) == 1:
        return _initial_distribution(n, levels, t)

    out_rates = np.array([params.level_rate(lvl) if lvl < n else 0.0 for lvl in levels])

    def rhs(_t, p):
        flow = out_rates * p
        dp = -flow
        dp[1:] += flow[:-1]
        return dp

    p0 = np.zeros(len(levels))
    p0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, t), p0, method="RK45", rtol=_RTOL, atol=_ATOL, t_eval=[t])
    if not sol.success:
        raise RuntimeError(f"level ODE integration failed: {sol.message}")
    return _finish(n, levels, sol.y[:, -1], t)


def _residue_terms(weights: list[int], m: int):
    """Exponential-polynomial coefficients of ``p_i`` in scaled time.

    ``weights`` are the integer rate factors of the occupiable levels up to
    and including level ``i`` (``m`` of them).  Returns ``(k, c0, c1)`` triples
    meaning ``(c0 + c1 * tau) * exp(-k * tau)`` with ``tau = mu * t``.
    Coefficients are exact rationals.
    """
    numerator = math.prod(weights[:-1])
    groups: dict[int, int] = {}
    for k in weights:
        groups[k] = groups.get(k, 0) + 1
    terms = []
    for k, mult in groups.items():
        others = [w for w in weights if w != k]
        denom = math.prod(w - k for w in others)
        base = Fraction(numerator, denom)
        if mult == 1:
            terms.append((k, base, Fraction(0)))
        elif mult == 2:
            shift = sum((Fraction(1, w - k) for w in others), Fraction(0))
            terms.append((k, -base * shift, base))
        else:  # pragma: no cover - lambda_j = lambda_{N-j} gives at most two
            raise ResidueConditioningError(f"pole of order {mult}")
    return terms


def solve_levels_residue(params: ChainParams, strategy: InjectionStrategy, t: float) -> LevelDistribution:
    """Evaluate the closed-form residue expansion of the level probabilities.

    Equal rates are detected on the integer factors ``j (N - j)``, so second
    order poles are found exactly.  Coefficients are exact rationals and the
    alternating sum is evaluated with enough working precision to absorb the
    cancellation; ``p_N`` is the complement of the other levels.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    n = params.n
    if n > _MAX_RESIDUE_N:
        raise ResidueConditioningError(f"N={n} exceeds the residue guard {_MAX_RESIDUE_N}")
    levels = _occupiable_levels(n, strategy)
    if t == 0 or params.mean_rate == 0 or len(levels) == 1:
        return _initial_distribution(n, levels, t)

    tau = params.mean_rate * t
    values = np.zeros(len(levels))
    weights: list[int] = []
    for idx, lvl in enumerate(levels[:-1]):
        weights.append(params.level_weight(lvl))
        terms = _residue_terms(weights, len(weights))
        scale = max(abs(c0) + abs(c1) * Fraction(tau) for _, c0, c1 in terms)
        digits = max(0, int(mpmath.log10(mpmath.mpf(scale.numerator) / scale.denominator))) + 30
        if digits > 2000:
            raise ResidueConditioningError(f"coefficient magnitude 1e{digits} too large")
        with mpmath.workdps(digits):
            mtau = mpmath.mpf(tau)
            total = mpmath.mpf(0)
            for k, c0, c1 in terms:
                coef = mpmath.mpf(c0.numerator) / c0.denominator
                if c1:
                    coef += mpmath.mpf(c1.numerator) / c1.denominator * mtau
                total += coef * mpmath.exp(-k * mtau)
            values[idx] = float(total)
    values[-1] = 1.0 - values[:-1].sum()
    return _finish(n, levels, values, t)


def expected_load(params: ChainParams, strategy: InjectionStrategy, solver=solve_levels_ode) -> LoadReport:
    """Expected number of cellular copies ``D`` for ``strategy``.

    ``D = sum_i (d_i + N - i) p_i(T_c)`` where ``d_i`` counts the copies
    injected by the time level ``i`` is reached.
    """
    n = params.n
    dist = solver(params, strategy, params.deadline)
    lvl = np.arange(1, n + 1)
    injected = np.array([strategy.copies_until(i) for i in lvl])
    p = dist.probs
    injected_mean = float(np.dot(injected, p))
    panic_mean = float(np.dot(n - lvl, p))
    initial = _occupiable_levels(n, strategy)[0]
    return LoadReport(
        expected_load=injected_mean + panic_mean,
        initial_copies=initial,
        expected_injected_copies=injected_mean,
        expected_panic_copies=panic_mean,
        level_distribution_at_deadline=dist,
    )


def gain(params: ChainParams, d: int) -> float:
    """Expected saving from sending seed ``d + 1``: ``G_d = D_d - D_{d+1}``.

    Computed from the level distribution of the ``d``-seed strategy as
    ``sum_{j>=d} (lambda_j / lambda_d) p_j(T_c) - 1``.
    """
    n = params.n
    if not 1 <= d <= n - 1:
        raise ValueError(f"d must be in 1..{n - 1}, got {d}")
    dist = solve_levels_ode(params, InjectionStrategy.prefix(d), params.deadline)
    wd = params.level_weight(d)
    j = np.arange(d, n)
    ratio = (j * (n - j)) / wd
    return float(np.dot(ratio, dist.probs[d - 1:n - 1]) - 1.0)


def _prefix_load(params: ChainParams, d: int) -> float:
    if d >= params.n:
        return float(params.n)
    return expected_load(params, InjectionStrategy.prefix(d)).expected_load


def optimal_seed_count(params: ChainParams) -> int:
    """Number of initial seeds minimising the expected cellular load.

    ``G_d`` decreases in ``d``, so the first ``d`` with ``G_d <= 0`` is found
    by bisection; the final choice is the load argmin over that ``d`` and its
    neighbours, ties going to the smaller count.
    """
    n = params.n
    if params.mean_rate == 0 or params.deadline == 0:
        return 1
    lo, hi = 1, n  # invariant: G_d > 0 for d < lo; answer in [lo, hi]
    while lo < hi:
        mid = (lo + hi) // 2
        if gain(params, mid) <= 0:
            hi = mid
        else:
            lo = mid + 1
    candidates = [d for d in (lo - 1, lo, lo + 1) if 1 <= d <= n]
    loads = [_prefix_load(params, d) for d in candidates]
    best = min(range(len(candidates)), key=lambda k: (loads[k], candidates[k]))
    return candidates[best]


def best_strategy_bruteforce(params: ChainParams, budget: int) -> InjectionStrategy:
    """Exhaustively search injection sets of a given size for the lowest load.

    Verification oracle only; limited to small ``N``.  Ties keep the
    lexicographically smallest set, which puts prefix strategies first.
    """
    n = params.n
    if n > _MAX_ENUMERATION_N:
        raise ValueError(f"enumeration limited to N <= {_MAX_ENUMERATION_N}, got {n}")
    if not 1 <= budget <= n - 1:
        raise ValueError(f"budget must be in 1..{n - 1}, got {budget}")
    best, best_load = None, math.inf
    for rest in itertools.combinations(range(2, n), budget - 1):
        strategy = InjectionStrategy((1,) + rest)
        load = expected_load(params, strategy).expected_load
        if load < best_load:
            best, best_load = strategy, load
    return best


def linearized_plant_gain(n: int, d: float) -> float:
    """Slope of ``s - d`` with respect to ``d`` around the optimum."""
    if d >= n:
        raise ValueError(f"d must be < N (d={d}, N={n})")
    return -2.0 * (n - 2 * d) / (n - d)
