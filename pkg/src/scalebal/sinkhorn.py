"""Finite-precision Sinkhorn scaling: full sweeps with testing, the randomized
single-coordinate variant, and the preset for entrywise-positive matrices."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .errors import NotEntrywisePositive, PrecondViolated
from .estimators import EstimatorBackend, approx_scaling_factor, test_scaling
from .fixedpoint import FixedVector, as_fraction, ceil_log2
from .oracle import SparseMatrix, TargetMarginals, mpx
from . import diagnostics


class Variant(str, Enum):
    FULL = "full"
    RANDOMIZED = "random"
    POSITIVE = "positive"


class StopReason(str, Enum):
    TEST_PASSED = "TestPassed"
    EXHAUSTED = "Exhausted"
    RANDOM_STOP = "RandomStop"


@dataclass(frozen=True)
class InstanceMeta:
    """The handful of instance quantities the parameter formulas need."""

    n: int
    m: int
    mu: Fraction
    sigma: object  # max(|ln r_min|, |ln c_min|)
    nu: Fraction = Fraction(1)
    r_ratio: Fraction = Fraction(1)
    c_ratio: Fraction = Fraction(1)
    positive: bool = False

    @classmethod
    def from_problem(cls, A: SparseMatrix, targets: TargetMarginals) -> "InstanceMeta":
        rmin, cmin = min(targets.r), min(targets.c)
        sigma = max(abs(mpx.log(mpx.mpf(rmin.numerator) / rmin.denominator)),
                    abs(mpx.log(mpx.mpf(cmin.numerator) / cmin.denominator)))
        return cls(
            n=A.n,
            m=A.m,
            mu=A.mu,
            sigma=sigma,
            nu=A.nu,
            r_ratio=max(targets.r) / rmin,
            c_ratio=max(targets.c) / cmin,
            positive=A.is_entrywise_positive(),
        )


@dataclass(frozen=True)
class SinkhornParams:
    T: int
    delta: Fraction
    delta_test: Fraction
    eta: Fraction
    b1: int
    b2: int
    epsilon: Fraction
    variant: Variant
    p: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("delta", "delta_test", "epsilon"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise PrecondViolated(f"{name} must lie in (0, 1]")
        if self.T < 1:
            raise PrecondViolated("T must be at least 1")
        if self.b2 < ceil_log2(1 / self.delta):
            raise PrecondViolated("b2 below ceil(log2(1/delta))")


def _ceil(v) -> int:
    return int(mpx.ceil(v))


def _ln(q):
    q = as_fraction(q)
    return mpx.log(mpx.mpf(q.numerator) / q.denominator)


def _check_eps(eps) -> Fraction:
    eps = as_fraction(eps)
    if not (0 < eps <= 1):
        raise PrecondViolated("epsilon must lie in (0, 1]")
    return eps


def _b1_for(T: int, meta: InstanceMeta) -> int:
    return max(1, _ceil(mpx.log(T * (_ln(1 / meta.mu) + meta.sigma + 1), 2)))


def derive_params_full(meta: InstanceMeta, eps) -> SinkhornParams:
    eps = _check_eps(eps)
    T = max(1, _ceil(8 / mpx.mpf(eps.numerator) * eps.denominator * _ln(1 / meta.mu)) + 1)
    delta = eps / 16
    return SinkhornParams(
        T=T,
        delta=delta,
        delta_test=eps / 2,
        eta=Fraction(1, 3 * (meta.n + 1) * T),
        b1=_b1_for(T, meta),
        b2=ceil_log2(1 / delta),
        epsilon=eps,
        variant=Variant.FULL,
    )


def derive_params_random(meta: InstanceMeta, eps, p) -> SinkhornParams:
    eps = _check_eps(eps)
    p = as_fraction(p)
    if not (0 < p <= 1):
        raise PrecondViolated("p must lie in (0, 1]")
    T = max(1, _ceil(6 * meta.n * _ln(1 / meta.mu) / (mpx.mpf(eps.numerator) / eps.denominator * p.numerator / p.denominator)))
    delta = eps * p / 12
    return SinkhornParams(
        T=T,
        delta=delta,
        delta_test=eps / 2,
        eta=p / (6 * meta.n * T),
        b1=_b1_for(T, meta),
        b2=ceil_log2(1 / delta),
        epsilon=eps,
        variant=Variant.RANDOMIZED,
        p=p,
    )


def derive_params_positive(meta: InstanceMeta, eps) -> SinkhornParams:
    if not meta.positive:
        raise NotEntrywisePositive("the positive preset needs every entry to be at least mu > 0")
    eps = _check_eps(eps)
    delta = eps / 64
    C = mpx.mpf(delta.numerator) / delta.denominator + _ln(meta.r_ratio) + _ln(meta.c_ratio) + _ln(meta.nu / meta.mu)
    e = mpx.mpf(eps.numerator) / eps.denominator
    T = max(1, _ceil((32 * _ln(1 / meta.mu) + mpx.log(2 / e, 2) * (1 + 34 * C)) / mpx.sqrt(e)))
    return SinkhornParams(
        T=T,
        delta=delta,
        delta_test=eps / 2,
        eta=Fraction(1, 3 * (meta.n + 1) * T),
        b1=_b1_for(T, meta),
        b2=ceil_log2(1 / delta),
        epsilon=eps,
        variant=Variant.POSITIVE,
    )


@dataclass
class ScalingState:
    x: FixedVector
    y: FixedVector
    t: int
    stopped_reason: StopReason

    @property
    def format(self) -> Tuple[int, int]:
        return self.x.format


@dataclass
class TraceRow:
    t: int
    f: float
    D_row: float
    D_col: float
    l1_row: float
    l1_col: float
    classical_queries: int
    quantum_queries: int


@dataclass
class ConvergenceTrace:
    rows: List[TraceRow] = field(default_factory=list)

    def add(self, A: SparseMatrix, targets: TargetMarginals, x: FixedVector, y: FixedVector, t: int):
        rep = diagnostics.metric_report(A, targets, x, y)
        led = A.ledger
        self.rows.append(
            TraceRow(t, rep.potential, rep.D_row, rep.D_col, rep.l1_row, rep.l1_col,
                     led.classical_queries, led.quantum_charged_queries)
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(TraceRow.__dataclass_fields__))
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
        return buf.getvalue()


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SCALEBAL_THREADS", "1")))
    except ValueError:
        return 1


def _sweep(A, marg, other, backend, params, rows: bool, stream, pool):
    n = A.n

    def one(l):
        view = A.row(l) if rows else A.col(l)
        return approx_scaling_factor(backend, view, marg[l], other, params.delta, params.b1, params.b2,
                                     params.eta, A.mu, stream + (l,)).value.raw

    raws = list(pool.map(one, range(n))) if pool is not None else [one(l) for l in range(n)]
    return FixedVector(raws, params.b1, params.b2)


def run_full_sinkhorn(
    A: SparseMatrix,
    targets: TargetMarginals,
    backend: EstimatorBackend,
    params: SinkhornParams,
    trace: bool = False,
    threads: Optional[int] = None,
    stream: Tuple[int, ...] = (),
) -> Tuple[ScalingState, ConvergenceTrace]:
    """Alternate row and column sweeps, testing after each, for at most T rounds."""
    if targets.n != A.n:
        raise PrecondViolated("targets and matrix differ in size")
    fmt = (params.b1, params.b2)
    x, y = FixedVector.zeros(A.n, fmt), FixedVector.zeros(A.n, fmt)
    tr = ConvergenceTrace()
    threads = default_threads() if threads is None else threads
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for t in range(1, params.T + 1):
            if t % 2:
                x = _sweep(A, targets.r, y, backend, params, True, tuple(stream) + (t, 0), pool)
            else:
                y = _sweep(A, targets.c, x, backend, params, False, tuple(stream) + (t, 1), pool)
            if trace:
                tr.add(A, targets, x, y, t)
            if test_scaling(backend, A, targets, x, y, params.delta_test, params.b1, params.b2,
                            params.eta, A.mu, tuple(stream) + (t, 2)):
                return ScalingState(x, y, t, StopReason.TEST_PASSED), tr
    finally:
        if pool is not None:
            pool.shutdown()
    return ScalingState(x, y, params.T, StopReason.EXHAUSTED), tr


def run_positive_sinkhorn(A, targets, backend, params, trace=False, threads=None, stream=()):
    """Full Sinkhorn under the positive-matrix parameters."""
    if not A.is_entrywise_positive():
        raise NotEntrywisePositive("matrix has zero or missing entries")
    return run_full_sinkhorn(A, targets, backend, params, trace, threads, stream)


def run_randomized_sinkhorn(
    A: SparseMatrix,
    targets: TargetMarginals,
    backend: EstimatorBackend,
    params: SinkhornParams,
    seed: int = 0,
    run_to_completion: bool = False,
    trace: bool = False,
    stream: Tuple[int, ...] = (),
) -> ScalingState:
    """Random single-coordinate updates; returns the state before a random stop tau.

    The stopping time is drawn up front from its own stream, so stopping
    early at tau changes nothing about the returned state; pass
    run_to_completion=True to execute all T iterations anyway.
    """
    n = A.n
    T = params.T
    base = [seed & 0xFFFFFFFFFFFFFFFF, *stream]
    tau = int(np.random.default_rng(base + [1]).integers(1, T + 1))
    choice_rng = np.random.default_rng(base + [2])
    fmt = (params.b1, params.b2)
    x, y = FixedVector.zeros(n, fmt), FixedVector.zeros(n, fmt)
    kept = None
    last = T if run_to_completion else tau - 1
    batch = 4096
    picks = np.empty(0, dtype=np.int64)
    for t in range(1, last + 1):
        k = (t - 1) % batch
        if k == 0:
            picks = choice_rng.integers(0, 2 * n, size=batch)
        if t == tau:
            kept = (x.copy(), y.copy())
        pick = int(picks[k])
        side, l = divmod(pick, n)
        key = (seed & 0xFFFFFFFFFFFFFFFF, *stream, t)
        if side == 0:
            o = approx_scaling_factor(backend, A.row(l), targets.r[l], y, params.delta, params.b1, params.b2,
                                      params.eta, A.mu, key)
            x.raw[l] = o.value.raw
        else:
            o = approx_scaling_factor(backend, A.col(l), targets.c[l], x, params.delta, params.b1, params.b2,
                                      params.eta, A.mu, key)
            y.raw[l] = o.value.raw
    if kept is None:
        kept = (x, y)
    return ScalingState(kept[0], kept[1], tau - 1, StopReason.RANDOM_STOP)


def run_randomized_sinkhorn_boosted(A, targets, backend, eps, p, seed: int = 0) -> ScalingState:
    """Amplify success to 1 - p: repeat at p = 1/3, certify each run with the test.

    Each run targets eps/2, so a good run passes the eps/2 test and a passing
    run is within eps.
    """
    eps = _check_eps(eps)
    p = as_fraction(p)
    meta = InstanceMeta.from_problem(A, targets)
    inner = derive_params_random(meta, eps / 2, Fraction(1, 3))
    rounds = max(1, math.ceil(math.log(1 / float(p)) / math.log(3)))
    eta_test = p / (2 * rounds)
    state = None
    for k in range(rounds):
        state = run_randomized_sinkhorn(A, targets, backend, inner, seed=seed, stream=(k,))
        if test_scaling(backend, A, targets, state.x, state.y, eps / 2, inner.b1, inner.b2, eta_test, A.mu,
                        (seed & 0xFFFFFFFFFFFFFFFF, k, 1 << 30)):
            return ScalingState(state.x, state.y, state.t, StopReason.TEST_PASSED)
    return ScalingState(state.x, state.y, state.t, StopReason.EXHAUSTED)


def scaling_bound(t: int, meta: InstanceMeta):
    """t (ln(1/mu) + 1 + sigma), the sup-norm bound on the iterates."""
    return t * (_ln(1 / meta.mu) + 1 + meta.sigma)
