import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scalebal import diagnostics as dg
from scalebal.errors import DomainError
from scalebal.instances import gadget_matrices
from scalebal.oracle import SparseMatrix, TargetMarginals, mpx

B0 = gadget_matrices()[0]
U2 = [Fraction(1, 2)] * 2
XS = [mpx.log(mpx.mpf(3) / 4), mpx.log(mpx.mpf(3) / 2)]
YS = [mpx.log(mpx.mpf(3) / 2), mpx.log(mpx.mpf(3) / 4)]


def test_relative_entropy_examples():
    assert dg.relative_entropy([0.3, 0.7], [0.3, 0.7]) == 0
    assert abs(dg.relative_entropy([1, 0], U2) - mpx.log(2)) < mpx.mpf(10) ** -40
    assert dg.relative_entropy(U2, [0, 1]) == mpx.inf


def test_pinsker_w_examples():
    assert dg.pinsker_w(0) == 0
    assert abs(dg.pinsker_w(1) - (1 - mpx.log(2))) < mpx.mpf(10) ** -40
    assert dg.pinsker_w(4) >= (1 - mpx.log(2)) * 4
    with pytest.raises(DomainError):
        dg.pinsker_w(-1)


def test_potentials():
    A = SparseMatrix(2, [(i, j, B0[i][j]) for i in range(2) for j in range(2)])
    assert abs(dg.potential_scaling(A, U2, U2, [0, 0], [0, 0]) - 1) < 1e-40
    f = dg.potential_scaling(A, U2, U2, XS, YS)
    assert abs(f - (1 - mpx.fsum(a * b for a, b in zip([0.5, 0.5], XS)) - mpx.fsum(a * b for a, b in zip([0.5, 0.5], YS)))) < 1e-30
    S = SparseMatrix(2, [(0, 1, Fraction(1, 4)), (1, 0, Fraction(1, 4))])
    assert abs(dg.potential_balancing(S, [0, 0]) - mpx.mpf(1) / 2) < 1e-40


def test_gradient_matches_finite_difference():
    A = SparseMatrix(2, [(i, j, B0[i][j]) for i in range(2) for j in range(2)])
    r, c = [Fraction(1, 3), Fraction(2, 3)], U2
    x, y = [mpx.mpf("0.1"), mpx.mpf("-0.3")], [mpx.mpf("0.2"), mpx.mpf("0.05")]
    gx, gy = dg.gradient_scaling(A, r, c, x, y)
    h = mpx.mpf(10) ** -20
    for k in range(2):
        xp = list(x)
        xp[k] += h
        fd = (dg.potential_scaling(A, r, c, xp, y) - dg.potential_scaling(A, r, c, x, y)) / h
        assert abs(fd - gx[k]) <= 1e-6 * abs(gx[k]) + 1e-15


def test_brute_force_examples():
    A = SparseMatrix(2, [(i, j, B0[i][j]) for i in range(2) for j in range(2)])
    res = dg.brute_force_potential_min(A, U2, U2)
    assert res.bounded
    assert abs(res.value - dg.potential_scaling(A, U2, U2, XS, YS)) < 1e-6
    assert dg.potential_scaling(A, U2, U2, [0, 0], [0, 0]) - res.value <= math.log(9)
    bad = SparseMatrix(2, [(0, 1, Fraction(1, 2)), (1, 1, Fraction(1, 2))], require_nonempty=False)
    out = dg.brute_force_potential_min(bad, U2, U2)
    assert not out.bounded and out.value == -mpx.inf


def test_exact_row_update_identity():
    rng = np.random.default_rng(0)
    n = 3
    vals = rng.integers(1, 50, size=(n, n))
    tot = int(vals.sum())
    A = SparseMatrix(n, [(i, j, Fraction(int(vals[i, j]), tot)) for i in range(n) for j in range(n)])
    r = c = [Fraction(1, n)] * n
    y = [mpx.mpf("0.2"), mpx.mpf("-0.1"), mpx.mpf("0.4")]
    x = [mpx.zero] * n
    cur, _ = dg.marginals(A, x, y)
    x2 = dg.exact_row_update(A, r, y)
    drop = dg.potential_scaling(A, r, c, x, y) - dg.potential_scaling(A, r, c, x2, y)
    assert abs(drop - dg.relative_entropy(r, cur)) < mpx.mpf(10) ** -30


def test_reports():
    A = SparseMatrix(2, [(i, j, B0[i][j]) for i in range(2) for j in range(2)])
    rep = dg.metric_report(A, TargetMarginals.uniform(2), XS, YS)
    assert rep.D_row < 1e-40 and rep.l1_col < 1e-40 and abs(rep.mass - 1) < 1e-40
    assert '"D_row"' in rep.to_json()
    S = SparseMatrix(2, [(0, 1, Fraction(1, 2)), (1, 0, Fraction(1, 4))])
    assert abs(dg.balance_residual(S, [0, 0]) - mpx.mpf(2) / 3) < 1e-40
    b = dg.balance_report(S, [-mpx.log(2) / 4, mpx.log(2) / 4])
    assert b.l1_row < 1e-40 and b.hellinger_rc < 1e-40


vec = st.lists(st.floats(0, 1), min_size=2, max_size=8)


@given(vec, st.data())
def test_generalized_pinsker(a, data):
    b = data.draw(st.lists(st.floats(1e-6, 1), min_size=len(a), max_size=len(a)))
    s = sum(a)
    if s == 0:
        return
    a = [v / s for v in a]
    l1 = dg.l1_distance(a, b)
    assert dg.relative_entropy(a, b) >= dg.pinsker_w(l1) - 1e-12


@given(st.lists(st.floats(0, 10), min_size=1, max_size=8), st.data())
def test_hellinger_lower_bound(a, data):
    b = data.draw(st.lists(st.floats(0, 10), min_size=len(a), max_size=len(a)))
    tot = sum(a) + sum(b)
    if tot == 0:
        return
    lhs = dg.hellinger_sq(a, b)
    assert lhs >= dg.l1_distance(a, b) ** 2 / (2 * tot) - 1e-12
