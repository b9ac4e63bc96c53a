"""Randomized Osborne balancing in fixed point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .errors import EmptyRowOrColumn, NonzeroDiagonal, PrecondViolated
from .estimators import EstimatorBackend, approx_scaling_factor
from .fixedpoint import FixedVector, as_fraction, ceil_log2
from .oracle import SparseMatrix, mpx, to_mp
from . import diagnostics


@dataclass(frozen=True)
class OsborneParams:
    T: int
    delta: Fraction
    eta: Fraction
    b1: int
    b2: int
    epsilon: Fraction
    p: Fraction


def _ln(q):
    q = as_fraction(q)
    return mpx.log(mpx.mpf(q.numerator) / q.denominator)


def check_balancing_input(A: SparseMatrix) -> None:
    for i in range(A.n):
        if A.get(i, i):
            raise NonzeroDiagonal(f"diagonal entry ({i + 1},{i + 1}) is nonzero")
    rows, cols = A.row_sums(), A.col_sums()
    for k in range(A.n):
        if rows[k] == 0 or cols[k] == 0:
            raise EmptyRowOrColumn(f"row or column {k + 1} has no positive entry")


def log_sigma(A: SparseMatrix):
    """max over l of |ln r_l(A)| and |ln c_l(A)|."""
    return max(abs(_ln(v)) for v in list(A.row_sums()) + list(A.col_sums()) if v > 0)


def derive_params_osborne(A: SparseMatrix, eps, p) -> OsborneParams:
    eps, p = as_fraction(eps), as_fraction(p)
    if not (0 < eps <= 1) or not (0 < p <= 1):
        raise PrecondViolated("epsilon and p must lie in (0, 1]")
    n = A.n
    lnratio = _ln(A.mass / A.mu)
    e2p = mpx.mpf(p.numerator) / p.denominator * (mpx.mpf(eps.numerator) / eps.denominator) ** 2
    T = max(1, int(mpx.ceil(12 * n * lnratio / e2p)))
    delta = p * eps * eps / 24
    b1 = max(1, int(mpx.ceil(mpx.log(log_sigma(A) + T * (lnratio / 2 + 1), 2))))
    return OsborneParams(
        T=T,
        delta=delta,
        eta=p * eps * eps / (12 * n * T),
        b1=b1,
        b2=ceil_log2(1 / delta),
        epsilon=eps,
        p=p,
    )


@dataclass
class OsborneTrace:
    """Per-iteration float64 monitor of f(x) = ||A(x)||_1 (off the ledger)."""

    t: List[int] = field(default_factory=list)
    f: List[float] = field(default_factory=list)

    def to_csv(self) -> str:
        return "t,f\n" + "".join(f"{a},{b!r}\n" for a, b in zip(self.t, self.f))


class _FastPotential:
    def __init__(self, A: SparseMatrix):
        tr = [(i, j, float(v)) for i, j, v in A.triples() if v]
        self.i = np.array([t[0] for t in tr])
        self.j = np.array([t[1] for t in tr])
        self.v = np.array([t[2] for t in tr])

    def __call__(self, x: np.ndarray) -> float:
        return float(np.sum(self.v * np.exp(x[self.i] - x[self.j])))


@dataclass
class OsborneResult:
    x: FixedVector
    tau: int
    trace: Optional[OsborneTrace]
    stopped_reason: str = "RandomStop"


def osborne_update(A, backend, params, x: FixedVector, l: int, stream) -> int:
    """Raw value of the new x_l, at scale 2^-(b2+1).

    Half the difference of the two estimates is exact at one extra bit, which
    is why x is stored with b2 + 1 trailing bits.
    """
    u = approx_scaling_factor(backend, A.row(l), 1, -x, params.delta, params.b1, params.b2,
                              params.eta / 2, A.mu, tuple(stream) + (0,))
    v = approx_scaling_factor(backend, A.col(l), 1, x, params.delta, params.b1, params.b2,
                              params.eta / 2, A.mu, tuple(stream) + (1,))
    return u.value.raw - v.value.raw


def run_random_osborne(
    A: SparseMatrix,
    backend: EstimatorBackend,
    params: OsborneParams,
    seed: int = 0,
    trace: bool = False,
    run_to_completion: bool = False,
    stream: Tuple[int, ...] = (),
) -> OsborneResult:
    """Uniformly random single-index Osborne updates, stopped at a random tau.

    Returns x^(tau); the stop is drawn first, so iterations after tau are only
    executed with run_to_completion=True.
    """
    check_balancing_input(A)
    n = A.n
    base = [seed & 0xFFFFFFFFFFFFFFFF, *stream]
    tau = int(np.random.default_rng(base + [1]).integers(1, params.T + 1))
    choice = np.random.default_rng(base + [2])
    x = FixedVector.zeros(n, (params.b1, params.b2 + 1))
    tr = OsborneTrace() if trace else None
    fast = _FastPotential(A) if trace else None
    if trace:
        tr.t.append(0)
        tr.f.append(fast(np.zeros(n)))
    kept = None
    last = params.T if run_to_completion else tau
    scale = 2.0 ** -(params.b2 + 1)
    picks = np.empty(0, dtype=np.int64)
    for t in range(1, last + 1):
        k = (t - 1) % 4096
        if k == 0:
            picks = choice.integers(0, n, size=4096)
        l = int(picks[k])
        x.raw[l] = osborne_update(A, backend, params, x, l, (*base, t))
        if trace:
            tr.t.append(t)
            tr.f.append(fast(np.array(x.raw, dtype=float) * scale))
        if t == tau:
            kept = x.copy()
    return OsborneResult(kept if kept is not None else x, tau, tr)


def check_balanced(A: SparseMatrix, x, eps) -> Tuple[bool, float]:
    """Exact residual ||r(A(x)) - c(A(x))||_1 / ||A(x)||_1 and whether it is <= eps."""
    if isinstance(x, FixedVector):
        x = x.fractions()
    res = diagnostics.balance_residual(A, x)
    return bool(res <= to_mp(as_fraction(eps))), float(res)


def estimate_balance_residual(A: SparseMatrix, backend, x: FixedVector, eps, eta, b1: int, stream=()) -> float:
    """Estimate the balance residual through the oracle at precision eps/16 per marginal.

    ln r_l(A(x)) = x_l - ASF(row l, 1, -x) and ln c_l(A(x)) = -x_l - ASF(col l, 1, x).
    """
    eps = as_fraction(eps)
    d = eps / 16
    b2 = ceil_log2(1 / d)
    xs = x.fractions()
    rh, ch = [], []
    for l in range(A.n):
        u = approx_scaling_factor(backend, A.row(l), 1, -x, d, b1, b2, eta, A.mu, tuple(stream) + (l, 0))
        v = approx_scaling_factor(backend, A.col(l), 1, x, d, b1, b2, eta, A.mu, tuple(stream) + (l, 1))
        rh.append(mpx.exp(to_mp(xs[l] - u.value.value)))
        ch.append(mpx.exp(to_mp(-xs[l] - v.value.value)))
    return float(mpx.fsum(abs(a - b) for a, b in zip(rh, ch)) / mpx.fsum(rh))


def run_random_osborne_boosted(A: SparseMatrix, backend, eps, p, seed: int = 0) -> OsborneResult:
    """Repeat at p = 1/3 and eps/2 until the estimated residual is <= 3 eps / 4."""
    eps, p = as_fraction(eps), as_fraction(p)
    inner = derive_params_osborne(A, eps / 2, Fraction(1, 3))
    rounds = max(1, math.ceil(math.log(1 / float(p)) / math.log(3)))
    eta = p / (4 * rounds * A.n)
    res = None
    for k in range(rounds):
        res = run_random_osborne(A, backend, inner, seed=seed, stream=(k,))
        est = estimate_balance_residual(A, backend, res.x, eps, eta, inner.b1 + 1, (seed & 0xFFFFFFFF, k, 1 << 30))
        if est <= 0.75 * float(eps):
            res.stopped_reason = "TestPassed"
            return res
    res.stopped_reason = "Exhausted"
    return res
