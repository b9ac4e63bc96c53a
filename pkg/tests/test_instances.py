import math
from fractions import Fraction

import pytest

from scalebal import diagnostics as dg
from scalebal.errors import BadDimensions, PrecondViolated
from scalebal.instances import (
    LAMBDA,
    build_gadget_instance,
    decode_descriptor,
    gadget_matrices,
    gibbs_kernel,
    planted_problem,
    random_balanceable,
    random_positive,
    random_scalable,
    random_targets,
)
from scalebal.oracle import TargetMarginals, mpx


def test_gadgets():
    B0, B1 = gadget_matrices()
    assert sum(sum(r) for r in B0) == 1 == sum(sum(r) for r in B1)
    X, Y = (Fraction(3, 4), Fraction(3, 2)), (Fraction(3, 2), Fraction(3, 4))
    assert all(X[i] * B0[i][j] * Y[j] == Fraction(1, 4) for i in range(2) for j in range(2))
    assert all(B1[i] == (B0[i][1], B0[i][0]) for i in range(2))


def test_identity_permutation_descriptor():
    inst = build_gadget_instance(8, 8, sigma=[0, 1, 2, 3])
    assert inst.z == (1, 0, 1, 0)
    assert inst.matrix.mass == 1


def test_transposition_flips_bits():
    a = build_gadget_instance(8, 8, sigma=[0, 1, 2, 3]).z
    b = build_gadget_instance(8, 8, sigma=[1, 0, 2, 3]).z
    assert [i for i in range(4) if a[i] != b[i]] == [0, 1]


@pytest.mark.parametrize("n,s", [(8, 8), (16, 8), (32, 16)])
def test_gadget_invariants(n, s):
    inst = build_gadget_instance(n, s, seed=n + s, explicit_zeros=True)
    A = inst.matrix
    assert A.mass == 1
    assert max(len(A.row(i).indices) for i in range(n)) <= s
    assert max(len(A.col(j).indices) for j in range(n)) <= s
    x, y = inst.exact_scaling()
    rep = dg.metric_report(A, TargetMarginals.uniform(n), x, y)
    assert rep.D_row < 1e-30 and rep.D_col < 1e-30
    assert decode_descriptor(inst, x, y) == inst.z


def test_bad_dimensions():
    for n, s in [(12, 8), (16, 12), (16, 32), (4, 4)]:
        with pytest.raises(BadDimensions):
            build_gadget_instance(n, s, seed=0)
    with pytest.raises(BadDimensions):
        build_gadget_instance(16, 8, sigma=[4, 1, 2, 3, 0, 5, 6, 7])


def test_single_block_decoding():
    inst = build_gadget_instance(8, 8, sigma=[1, 0, 2, 3])
    x, y = inst.exact_scaling()
    assert y[0] - y[1] == pytest.approx(float(mpx.log(2)) * (1 if inst.z[0] == 0 else -1))


@pytest.mark.parametrize("seed", range(5))
def test_random_generators_respect_mu(seed):
    mu = Fraction(1, 256)
    A = random_scalable(16, 40, mu, seed)
    assert A.m == 40 and A.mu >= mu and A.mass <= 1
    B = random_balanceable(8, 24, Fraction(1, 64), seed)
    assert B.m == 24 and B.mu >= Fraction(1, 64) and all(B.get(i, i) == 0 for i in range(8))
    P = random_positive(6, seed=seed)
    assert P.is_entrywise_positive()
    assert all(v.denominator <= 2**32 for *_, v in A.triples() + B.triples() + P.triples())
    t = random_targets(16, seed)
    assert sum(t.r) == 1 == sum(t.c)


def test_generators_deterministic():
    assert random_scalable(8, 20, Fraction(1, 64), 3).triples() == random_scalable(8, 20, Fraction(1, 64), 3).triples()


def test_generator_limits():
    with pytest.raises(PrecondViolated):
        random_scalable(4, 3, Fraction(1, 64))
    with pytest.raises(PrecondViolated):
        random_balanceable(3, 7, Fraction(1, 64))


def test_scalable_instance_converges():
    """Exact Sinkhorn drives both divergences to ~0 on a generated instance."""
    A = random_scalable(6, 14, Fraction(1, 64), 2)
    t = TargetMarginals.uniform(6)
    n = 6
    y = [mpx.zero] * n
    for _ in range(300):
        x = dg.exact_row_update(A, t.r, y)
        y = dg.exact_col_update(A, t.c, x)
    rep = dg.metric_report(A, t, x, y)
    assert rep.D_row < 1e-10 and rep.D_col < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_planted_problem_is_scalable_to_its_targets(seed):
    A, t = planted_problem(8, 20, Fraction(1, 512), seed=seed, shift=2)
    assert A.mu >= Fraction(1, 512) and sum(t.r) == 1 == sum(t.c)
    assert all(v.denominator <= 2**32 for *_, v in A.triples())
    y = [mpx.zero] * 8
    for _ in range(200):
        x = dg.exact_row_update(A, t.r, y)
        y = dg.exact_col_update(A, t.c, x)
    rep = dg.metric_report(A, t, x, y)
    assert rep.D_row < 1e-20 and rep.D_col < 1e-20
    # the planted scaling uses exponents that are multiples of ln 2
    k = [float(v - x[0]) / math.log(2) for v in x]
    assert all(abs(v - round(v)) < 1e-9 for v in k)


def test_balanceable_instance_descends_to_balance():
    A = random_balanceable(3, 4, Fraction(1, 16), 1)
    x = [mpx.zero] * 3
    for _ in range(400):
        for l in range(3):
            r, c = dg.marginals(A, x, [-t for t in x])
            x[l] += mpx.log(c[l] / r[l]) / 2
    assert dg.balance_residual(A, x) < 1e-10


def test_gibbs_kernel():
    K = gibbs_kernel(8, Fraction(1, 10))
    assert K.is_entrywise_positive() and K.mass <= 1
    assert K.get(0, 0) > K.get(0, 7)


def test_lambda_constant():
    assert LAMBDA == Fraction(1, 3)
