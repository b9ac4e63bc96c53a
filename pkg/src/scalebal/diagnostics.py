"""High-precision reference metrics.

Everything here runs on exact rationals and 160-bit mpmath floats.  These are
the yardsticks the fixed-point pipeline is measured against, so nothing in
this module touches the (b1, b2) kernels.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from .errors import DomainError
from .oracle import SparseMatrix, TargetMarginals, mpx, to_mp

INF = mpx.inf


def _triples(A):
    """(n, [(i, j, value)]) for a SparseMatrix or a dense square array."""
    if isinstance(A, SparseMatrix):
        return A.n, [(i, j, to_mp(v)) for i, j, v in A.triples() if v]
    rows = [list(r) for r in A]
    n = len(rows)
    out = []
    for i, r in enumerate(rows):
        if len(r) != n:
            raise ValueError("dense matrix must be square")
        for j, v in enumerate(r):
            if v:
                out.append((i, j, to_mp(v)))
    return n, out


def _vec(v):
    return [to_mp(t) for t in v]


# ---------------------------------------------------------------------------
# divergences


def relative_entropy(a, b):
    """D(a||b) = sum b - a + a ln(a/b), +inf when a_i > 0 = b_i."""
    a, b = _vec(a), _vec(b)
    if len(a) != len(b):
        raise ValueError("length mismatch")
    total = mpx.zero
    for ai, bi in zip(a, b):
        if ai < 0 or bi < 0:
            raise DomainError("relative entropy needs non-negative vectors")
        if ai == 0:
            total += bi
        elif bi == 0:
            return INF
        else:
            total += bi - ai + ai * mpx.log(ai / bi)
    return total


def pinsker_w(beta):
    beta = to_mp(beta)
    if beta <= -1:
        raise DomainError("w(beta) needs beta > -1")
    return beta - mpx.log1p(beta)


def l1_distance(a, b):
    return mpx.fsum(abs(x - y) for x, y in zip(_vec(a), _vec(b)))


def hellinger_sq(a, b):
    """Squared l2 distance of the entrywise square roots."""
    return mpx.fsum((mpx.sqrt(x) - mpx.sqrt(y)) ** 2 for x, y in zip(_vec(a), _vec(b)))


# ---------------------------------------------------------------------------
# marginals and potentials


def marginals(A, x, y):
    n, trip = _triples(A)
    ex = [mpx.exp(t) for t in _vec(x)]
    ey = [mpx.exp(t) for t in _vec(y)]
    r = [mpx.zero] * n
    c = [mpx.zero] * n
    for i, j, v in trip:
        t = v * ex[i] * ey[j]
        r[i] += t
        c[j] += t
    return r, c


def potential_scaling(A, r, c, x, y):
    """f(x, y) = sum A_ij e^{x_i + y_j} - <r, x> - <c, y>."""
    rr, _ = marginals(A, x, y)
    xs, ys = _vec(x), _vec(y)
    return mpx.fsum(rr) - mpx.fsum(a * b for a, b in zip(_vec(r), xs)) - mpx.fsum(
        a * b for a, b in zip(_vec(c), ys)
    )


def potential_balancing(A, x):
    """f(x) = ||A(x)||_1 with A(x)_ij = A_ij e^{x_i - x_j}."""
    xs = _vec(x)
    rr, _ = marginals(A, xs, [-t for t in xs])
    return mpx.fsum(rr)


def gradient_scaling(A, r, c, x, y):
    rr, cc = marginals(A, x, y)
    return [a - b for a, b in zip(rr, _vec(r))], [a - b for a, b in zip(cc, _vec(c))]


def exact_row_update(A, r, y):
    """x_i = ln(r_i / sum_j A_ij e^{y_j}): the exact Sinkhorn row step."""
    n = len(r)
    rr, _ = marginals(A, [0] * n, y)
    return [mpx.log(to_mp(ri) / s) for ri, s in zip(r, rr)]


def exact_col_update(A, c, x):
    n = len(c)
    _, cc = marginals(A, x, [0] * n)
    return [mpx.log(to_mp(ci) / s) for ci, s in zip(c, cc)]


# ---------------------------------------------------------------------------
# reports


@dataclass
class MetricReport:
    D_row: float
    D_col: float
    l1_row: float
    l1_col: float
    potential: float
    mass: float
    hellinger_rc: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _f(v) -> float:
    return float(v) if v != INF else float("inf")


def metric_report(A, targets: TargetMarginals, x, y) -> MetricReport:
    rr, cc = marginals(A, x, y)
    r, c = _vec(targets.r), _vec(targets.c)
    xs, ys = _vec(x), _vec(y)
    f = mpx.fsum(rr) - mpx.fsum(a * b for a, b in zip(r, xs)) - mpx.fsum(a * b for a, b in zip(c, ys))
    return MetricReport(
        D_row=_f(relative_entropy(r, rr)),
        D_col=_f(relative_entropy(c, cc)),
        l1_row=float(l1_distance(r, rr)),
        l1_col=float(l1_distance(c, cc)),
        potential=float(f),
        mass=float(mpx.fsum(rr)),
    )


def balance_residual(A, x):
    """||r(A(x)) - c(A(x))||_1 / ||A(x)||_1 in high precision."""
    xs = _vec(x)
    rr, cc = marginals(A, xs, [-t for t in xs])
    return l1_distance(rr, cc) / mpx.fsum(rr)


def balance_report(A, x) -> MetricReport:
    xs = _vec(x)
    rr, cc = marginals(A, xs, [-t for t in xs])
    mass = mpx.fsum(rr)
    return MetricReport(
        D_row=_f(relative_entropy(rr, cc)),
        D_col=_f(relative_entropy(cc, rr)),
        l1_row=float(l1_distance(rr, cc) / mass),
        l1_col=float(l1_distance(rr, cc) / mass),
        potential=float(mass),
        mass=float(mass),
        hellinger_rc=float(hellinger_sq(rr, cc)),
    )


# ---------------------------------------------------------------------------
# brute-force minimization for tiny instances


@dataclass
class PotentialMin:
    value: object  # mpf, or -inf when unbounded
    x: List
    y: List
    bounded: bool
    iterations: int


def brute_force_potential_min(A, r, c, max_iter: int = 400, tol=None, blowup=1e4) -> PotentialMin:
    """Minimize f(x, y) by damped Newton with backtracking (n <= 4).

    The last column coordinate is pinned to 0, which removes the (x+t, y-t)
    invariance.  A run whose iterates leave a box of radius ``blowup`` while f
    keeps decreasing is reported as unbounded.
    """
    n, trip = _triples(A)
    if n > 4:
        raise ValueError("brute force is meant for n <= 4")
    r, c = _vec(r), _vec(c)
    tol = tol if tol is not None else mpx.mpf(2) ** -120
    k = 2 * n - 1
    z = [mpx.zero] * k

    def split(z):
        return z[:n], z[n:] + [mpx.zero]

    def f(z):
        x, y = split(z)
        return potential_scaling_raw(trip, r, c, x, y)

    fz = f(z)
    f0 = fz
    for it in range(max_iter):
        x, y = split(z)
        ex = [mpx.exp(t) for t in x]
        ey = [mpx.exp(t) for t in y]
        g = [mpx.zero] * k
        H = mpx.zeros(k, k)
        for i, j, v in trip:
            t = v * ex[i] * ey[j]
            g[i] += t
            H[i, i] += t
            if j < n - 1:
                g[n + j] += t
                H[n + j, n + j] += t
                H[i, n + j] += t
                H[n + j, i] += t
        for i in range(n):
            g[i] -= r[i]
        for j in range(n - 1):
            g[n + j] -= c[j]
        gn = mpx.sqrt(mpx.fsum(t * t for t in g))
        if gn < tol:
            return PotentialMin(fz, *split(z), True, it)
        reg = gn * mpx.mpf(10) ** -12
        for i in range(k):
            H[i, i] += reg
        try:
            d = mpx.lu_solve(H, mpx.matrix([-t for t in g]))
            d = [d[i] for i in range(k)]
        except ZeroDivisionError:
            d = [-t for t in g]
        slope = mpx.fsum(a * b for a, b in zip(g, d))
        if slope >= 0:
            d = [-t for t in g]
            slope = -gn * gn
        step = mpx.one
        while True:
            z_new = [a + step * b for a, b in zip(z, d)]
            f_new = f(z_new)
            if f_new <= fz + step * slope / 4 or step < mpx.mpf(2) ** -60:
                break
            step /= 2
        z, fz = z_new, f_new
        if max(abs(t) for t in z) > blowup or fz < f0 - blowup:
            return PotentialMin(-INF, *split(z), False, it)
    return PotentialMin(fz, *split(z), True, max_iter)


def potential_scaling_raw(trip, r, c, x, y):
    s = mpx.fsum(v * mpx.exp(x[i] + y[j]) for i, j, v in trip)
    return s - mpx.fsum(a * b for a, b in zip(r, x)) - mpx.fsum(a * b for a, b in zip(c, y))
