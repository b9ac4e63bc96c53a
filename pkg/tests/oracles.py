"""Independent reference implementations used to freeze and check expected values.

These deliberately share no code with the package: a separate mpmath context
at 256 bits and plain Fractions.
"""

from fractions import Fraction

import mpmath

ref = mpmath.MPContext()
ref.prec = 256


def mp(q):
    q = Fraction(q)
    return ref.mpf(q.numerator) / q.denominator


def nearest(v, p):
    """round(v * 2^p), ties away from zero, for an mpf v (ties can only be exact)."""
    t = ref.ldexp(v, p)
    f = ref.floor(abs(t))
    r = int(f) + (1 if abs(t) - f >= ref.mpf(1) / 2 else 0)
    return r if t >= 0 else -r


def exp_raw(X, s, p):
    return nearest(ref.exp(ref.ldexp(X, -s)), p)


def ln_raw(X, s, p):
    return nearest(ref.log(ref.ldexp(X, -s)), p)


def asin_sqrt_raw(V, s, p):
    return nearest(ref.asin(ref.sqrt(ref.ldexp(V, -s))), p)


def sin_sq_raw(X, s, p, pi_multiple=False):
    th = ref.ldexp(X, -s)
    if pi_multiple:
        th = th * ref.pi
    return nearest(ref.sin(th) ** 2, p)


def reaa_target(a1, a2, delta_y, c, d):
    """min{(a1/a2) e^delta_y, 2^d - 2^-c}; a2 = 0 counts as infinite ratio."""
    cap = ref.mpf(2) ** d - ref.mpf(2) ** -c
    if a2 == 0:
        return cap
    return min(mp(a1) / mp(a2) * ref.exp(mp(delta_y)), cap)


def log_scaling_factor(a, r, y):
    """ln(r / sum_j a_j e^{y_j})."""
    s = ref.fsum(mp(aj) * ref.exp(mp(yj)) for aj, yj in zip(a, y) if aj)
    return ref.log(mp(r)) - ref.log(s)


def marginals(triples, n, x, y):
    r = [ref.zero] * n
    c = [ref.zero] * n
    for i, j, v in triples:
        t = mp(v) * ref.exp(mp(x[i]) + mp(y[j]))
        r[i] += t
        c[j] += t
    return r, c


def kl(a, b):
    tot = ref.zero
    for ai, bi in zip(a, b):
        ai, bi = ref.mpf(ai), ref.mpf(bi)
        tot += bi - ai + (ai * ref.log(ai / bi) if ai else 0)
    return tot
