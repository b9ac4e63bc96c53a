"""Distribution-level simulation of amplitude-estimation sums and max-finding.

No state vectors are built.  The Grover operator used for the sum acts as a
rotation on a two-dimensional subspace, with eigenphases +phi and -phi where
phi = 2 arcsin(sqrt(a)).  Phase estimation on the starting state therefore
yields outcome m with probability

    1/2 F(N phi/2pi - m) + 1/2 F(-N phi/2pi - m),
    F(u) = sin^2(pi u) / (N^2 sin^2(pi u / N)),    N = 2^t,

which we sample directly.  Everything after the measurement goes through the
fixed-point kernels exactly as the circuit would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import PrecondViolated
from .fixedpoint import FixedPoint, as_fraction, asin_sqrt_raw, ceil_log2, round_shift, sin_sq_raw

MEDIAN_CONSTANT = 9
WINDOW = 64
MAX_FIND_PROBE_COST = 3


@dataclass(frozen=True)
class PhaseEstimationConfig:
    t: int
    repetitions: int
    per_iteration_queries: int = 2

    def __post_init__(self):
        if self.t < 1 or self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError("need t >= 1 and an odd repetition count")

    @classmethod
    def derive(cls, n: int, delta, eta) -> "PhaseEstimationConfig":
        """Phase bits and median count for an n-term sum (n a power of two)."""
        delta = as_fraction(delta)
        # ceil(log2(sqrt(n)/delta)) == ceil(ceil(log2(n/delta^2)) / 2)
        t = -(-ceil_log2(Fraction(n) / (delta * delta)) // 2) + 8
        return cls(t=max(t, 1), repetitions=repetitions_for(eta))

    @property
    def charged_queries(self) -> int:
        return self.repetitions * (1 << self.t) * self.per_iteration_queries


def repetitions_for(eta) -> int:
    eta = float(eta)
    if eta <= 0:
        raise PrecondViolated("failure probability must be positive")
    k = max(0, math.ceil(MEDIAN_CONSTANT * math.log(1.0 / eta)))
    return 2 * k + 1


# ---------------------------------------------------------------------------
# phase-estimation outcome law


def fejer(u, N: int):
    """|N^-1 sum_{k<N} e^{2 pi i k u / N}|^2 for real offsets u."""
    u = np.asarray(u, dtype=float)
    den = np.sin(np.pi * u / N)
    small = np.abs(den) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(np.pi * u) ** 2 / (N * N * den * den)
    return np.where(small, 1.0, val)


def phase_outcome_distribution(phi: float, t: int) -> np.ndarray:
    """Full outcome law over m in [0, 2^t) for eigenphases +-phi (small t)."""
    N = 1 << t
    m = np.arange(N)
    w = N * phi / (2 * np.pi)
    return 0.5 * fejer(w - m, N) + 0.5 * fejer(-w - m, N)


class _OutcomeSampler:
    """Samples m for one eigenphase.

    Small registers are enumerated.  Otherwise the 2*WINDOW+1 outcomes around
    the peak are tabulated and the remaining tail is drawn by rejection from a
    1/k^2 proposal, which dominates F there.
    """

    def __init__(self, omega: float, N: int):
        self.N = N
        if N <= 4 * WINDOW:
            self.m0, self.offsets = 0, np.arange(N)
            probs = fejer(omega - self.offsets, N)
            self.cum = np.cumsum(probs / probs.sum())
            self.mass = 2.0  # never take the tail branch
            return
        K = WINDOW
        self.m0 = int(math.floor(omega + 0.5))
        self.f = omega - self.m0
        self.offsets = np.arange(-K, K + 1)
        self.cum = np.cumsum(fejer(self.f - self.offsets, N))
        self.mass = float(self.cum[-1])
        rest = N - (2 * K + 1)
        self.hi = K + (rest + 1) // 2  # largest positive tail offset
        self.lo = K + rest // 2  # largest negative tail offset magnitude
        self.envelope = (K + 1.5) / (4.0 * K * K) * 1.0001

    def draw(self, u: float, rng) -> int:
        if u < self.mass:
            j = int(np.searchsorted(self.cum, u, side="right"))
            j = min(j, len(self.offsets) - 1)
            return (self.m0 + int(self.offsets[j])) % self.N
        K = WINDOW
        while True:
            side = 1 if rng.random() < 0.5 else -1
            x = (K + 0.5) / (1.0 - rng.random())
            k = int(math.floor(x + 0.5))
            if k > (self.hi if side > 0 else self.lo):
                continue
            q = (K + 0.5) / ((k - 0.5) * (k + 0.5))
            target = float(fejer(self.f - side * k, self.N))
            ratio = target / (self.envelope * q)
            if ratio > 1.0:
                raise AssertionError("tail envelope violated")
            if rng.random() < ratio:
                return (self.m0 + side * k) % self.N


def sample_phase_outcomes(phi: float, t: int, size: int, rng) -> np.ndarray:
    """Draw `size` phase-estimation outcomes for eigenphases +-phi, weight 1/2 each."""
    N = 1 << t
    w = (N * phi / (2 * math.pi)) % N
    samplers = (_OutcomeSampler(w, N), _OutcomeSampler((N - w) % N, N))
    signs = rng.random(size) < 0.5
    us = rng.random(size)
    return np.array([samplers[int(sg)].draw(float(u), rng) for sg, u in zip(signs, us)], dtype=np.int64)


# ---------------------------------------------------------------------------
# QuantumApproximateSum


@dataclass(frozen=True)
class SumOutcome:
    raw: int  # estimate at scale 2^-b
    b: int
    n_padded: int
    charged_queries: int
    declared_success: bool

    @property
    def value(self) -> FixedPoint:
        k = self.n_padded.bit_length() - 1
        return FixedPoint(self.raw, k + 1, self.b)


@lru_cache(maxsize=1 << 16)
def _tilde_v(V: int, b: int, L: int, pv: int) -> int:
    zeta = asin_sqrt_raw(V, b, L)
    return sin_sq_raw(zeta, L, pv)


@lru_cache(maxsize=1 << 14)
def _gamma(m: int, t: int, Lg: int) -> int:
    return sin_sq_raw(m, t, Lg, True)


def _next_pow2(n: int) -> int:
    return max(2, 1 << (n - 1).bit_length())


def qas_raw(V: Sequence[int], b: int, delta, eta, rng) -> SumOutcome:
    """Core of quantum_approximate_sum on raw (0, b) inputs."""
    delta = as_fraction(delta)
    if not (0 < delta <= Fraction(1, 2)):
        raise PrecondViolated("delta must lie in (0, 1/2]")
    if b < ceil_log2(1 / delta) + 6:
        raise PrecondViolated(f"b = {b} too small for delta = {delta}")
    full = 1 << b
    if any(v < 0 or 4 * v > 3 * full for v in V):
        raise PrecondViolated("entries must lie in [0, 3/4]")
    if not V or 4 * max(V) < full:
        raise PrecondViolated("need an entry of at least 1/4")
    n = _next_pow2(len(V))
    k = n.bit_length() - 1
    L = ceil_log2(Fraction(n) / delta) + 4
    pv = L + 16
    tilde_sum = sum(_tilde_v(v, b, L, pv) for v in V if v)
    a = tilde_sum / (n * float(1 << pv))
    phi = 2.0 * math.asin(math.sqrt(min(max(a, 0.0), 1.0)))
    cfg = PhaseEstimationConfig.derive(n, delta, eta)
    ms = sample_phase_outcomes(phi, cfg.t, cfg.repetitions, rng)
    Lg = ceil_log2(Fraction(n) / delta) + 8
    ests = sorted(round_shift(n * _gamma(int(m), cfg.t, Lg), Lg - b) for m in ms)
    est = ests[len(ests) // 2]
    est = min(est, (1 << (k + 1 + b)) - 1)
    true = sum(V)
    ok = abs(Fraction(est - true)) <= delta * true
    return SumOutcome(est, b, n, cfg.charged_queries, bool(ok))


def quantum_approximate_sum(v_oracle, n: int, b: int, delta, eta, seed=None, rng=None) -> SumOutcome:
    """(1 +- delta)-multiplicative estimate of sum_j v_j with failure prob eta.

    ``v_oracle`` is a sequence of FixedPoint values in (0, b) format or a
    callable index -> FixedPoint.
    """
    vals = [v_oracle(j) for j in range(n)] if callable(v_oracle) else list(v_oracle)
    if len(vals) != n:
        raise PrecondViolated("oracle length does not match n")
    V = []
    for v in vals:
        if v.b1 != 0 or v.b2 != b:
            raise PrecondViolated("v entries must be in (0, b) format")
        V.append(v.raw)
    if rng is None:
        rng = np.random.default_rng(seed)
    return qas_raw(V, b, delta, eta, rng)


# ---------------------------------------------------------------------------
# maximum finding


def max_find_charge(n: int, eta) -> int:
    eta = float(eta)
    lg = math.log(1.0 / eta) if eta > 0 else 64 * math.log(2)
    return math.ceil(MAX_FIND_PROBE_COST * math.sqrt(n) * max(1.0, lg))


def quantum_max_find(compare: Callable[[int, int], bool], n: int, eta, seed=None, rng=None) -> Tuple[int, int, bool]:
    """Index of an approximately largest term, as quantum max-finding would give.

    ``compare(i, j)`` answers "is term i at least term j" with the
    greater_or_equal contract.  A full pass keeps the current best unless a
    later term beats it; then, with probability eta, the answer is replaced
    by a uniformly random index.  Returns (index, charged queries, corrupted).
    """
    if n < 1:
        raise PrecondViolated("empty index set")
    best = 0
    for j in range(1, n):
        if not compare(best, j):
            best = j
    if rng is None:
        rng = np.random.default_rng(seed)
    corrupted = False
    if float(eta) > 0 and rng.random() < float(eta):
        pick = int(rng.integers(n))
        corrupted = pick != best
        best = pick
    return best, max_find_charge(n, eta), corrupted
