"""Instance generators: random scalable and balanceable matrices, positive
matrices, and the permutation-gadget instances with a hidden bit string."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BadDimensions, PrecondViolated
from .fixedpoint import as_fraction
from .oracle import SparseMatrix, TargetMarginals, mpx

LAMBDA = Fraction(1, 3)
QUANTUM = 24  # generated values are multiples of 2^-24


def gadget_matrices():
    """The two 2x2 gadgets; B1 is B0 with its columns swapped."""
    B0 = ((Fraction(2, 9), Fraction(4, 9)), (Fraction(1, 9), Fraction(2, 9)))
    B1 = ((Fraction(4, 9), Fraction(2, 9)), (Fraction(2, 9), Fraction(1, 9)))
    return B0, B1


@dataclass(frozen=True)
class GadgetInstance:
    n: int
    s: int
    sigma: Tuple[int, ...]  # 0-based permutation of the n/2 block indices
    matrix: SparseMatrix
    z: Tuple[int, ...]

    def exact_scaling(self):
        """Closed-form scaling vectors (mpmath) reaching uniform marginals exactly."""
        lo, hi = mpx.log(mpx.mpf(3) / 4), mpx.log(mpx.mpf(3) / 2)
        x = [mpx.zero] * self.n
        y = [mpx.zero] * self.n
        for j, i in enumerate(self.sigma):
            x[2 * i], x[2 * i + 1] = lo, hi
            if self.z[j] == 0:
                y[2 * j], y[2 * j + 1] = hi, lo
            else:
                y[2 * j], y[2 * j + 1] = lo, hi
        return x, y


def _check_dims(n: int, s: int):
    if n < 8 or s < 8 or n % 8 or s % 8 or n % s:
        raise BadDimensions(f"need 8 | s and s | n, got n={n}, s={s}")


def build_gadget_instance(n: int, s: int, seed: Optional[int] = None, sigma: Optional[Sequence[int]] = None,
                          explicit_zeros: bool = False) -> GadgetInstance:
    """Block (sigma(j), j) holds (2/n) B_{z_j} with z_j = (sigma(j) + 1) mod 2.

    sigma is 0-based, so the bit is the parity of the 1-based block row.  When
    s < n the permutation is block diagonal: it maps each group of s/2
    consecutive block indices to itself.  ``explicit_zeros`` lists every
    slot of the diagonal s x s groups, so each line really has s
    potentially-nonzero entries.
    """
    _check_dims(n, s)
    h, g = n // 2, s // 2
    if sigma is None:
        rng = np.random.default_rng(seed)
        sig: List[int] = []
        for base in range(0, h, g):
            sig.extend(int(base + v) for v in rng.permutation(g))
    else:
        sig = [int(v) for v in sigma]
        if sorted(sig) != list(range(h)):
            raise BadDimensions("sigma must be a permutation of the n/2 block indices")
        if any(sig[j] // g != j // g for j in range(h)):
            raise BadDimensions("sigma must respect the s-sparse group structure")
    B = gadget_matrices()
    w = Fraction(2, n)
    vals = {}
    z = []
    for j, i in enumerate(sig):
        bit = (i + 1) % 2
        z.append(bit)
        blk = B[bit]
        for a in range(2):
            for b in range(2):
                vals[(2 * i + a, 2 * j + b)] = w * blk[a][b]
    if explicit_zeros:
        for base in range(0, n, s):
            for i in range(base, base + s):
                for j in range(base, base + s):
                    vals.setdefault((i, j), Fraction(0))
    A = SparseMatrix(n, [(i, j, v) for (i, j), v in sorted(vals.items())])
    return GadgetInstance(n, s, tuple(sig), A, tuple(z))


def decode_descriptor(instance: GadgetInstance, x, y) -> Tuple[int, ...]:
    """Bit j is 0 when y[2j] > y[2j+1] and 1 otherwise."""
    if len(x) != instance.n or len(y) != instance.n:
        raise BadDimensions("scaling vectors must have length n")
    return tuple(0 if y[2 * j] > y[2 * j + 1] else 1 for j in range(instance.n // 2))


# ---------------------------------------------------------------------------
# random instances


def _values(rng, k: int, mu: Fraction, spread: int = 16) -> List[Fraction]:
    """k values >= mu, multiples of 2^-24 (when mu is), summing to at most 1.

    Values are log-uniform on [mu, spread * mu]; when that would overshoot a
    total of 1 the parts above mu are shrunk proportionally.
    """
    if k * mu > 1:
        raise PrecondViolated("m * mu exceeds 1")
    f = np.exp2(rng.random(k) * np.log2(max(spread, 1))) - 1.0
    extra = [Fraction(float(mu * int(1 << QUANTUM)) * t).limit_denominator(1) for t in f]
    room = (1 - k * mu) * (1 << QUANTUM)
    tot = sum(extra)
    if tot > room:
        extra = [e * room / tot for e in extra]
    return [mu + Fraction(int(e), 1 << QUANTUM) for e in extra]


def _mu(mu) -> Fraction:
    mu = as_fraction(mu)
    if not (0 < mu <= 1):
        raise PrecondViolated("mu must lie in (0, 1]")
    if mu.denominator > 1 << 32:
        raise PrecondViolated("mu needs a denominator of at most 2^32")
    return mu


def _fill(rng, support: set, n: int, m: int, allow) -> None:
    cand = [(i, j) for i in range(n) for j in range(n) if allow(i, j) and (i, j) not in support]
    extra = m - len(support)
    if extra > len(cand):
        raise PrecondViolated(f"m = {m} exceeds the number of available slots")
    if extra > 0:
        for k in rng.choice(len(cand), size=extra, replace=False):
            support.add(cand[int(k)])


def random_scalable(n: int, m: int, mu, seed: int = 0, spread: int = 16) -> SparseMatrix:
    """Random matrix whose support is fully indecomposable.

    The support contains two permutations whose union forms one 2n-cycle in the
    bipartite graph, so the matrix is exactly scalable to uniform marginals.
    Sparse supports are generally not scalable to arbitrary non-uniform
    targets; use planted_problem for those.
    """
    mu = _mu(mu)
    rng = np.random.default_rng([seed, n, m])
    cells = _cycle_support(rng, n, m)
    return SparseMatrix(n, [(i, j, v) for (i, j), v in zip(cells, _values(rng, len(cells), mu, spread))])


def _cycle_support(rng, n: int, m: int) -> List[Tuple[int, int]]:
    if m < min(2 * n, n * n) or m > n * n:
        raise PrecondViolated("need min(2n, n^2) <= m <= n^2")
    pi, rho = rng.permutation(n), rng.permutation(n)
    support = {(int(pi[k]), int(rho[k])) for k in range(n)}
    support |= {(int(pi[k]), int(rho[(k + 1) % n])) for k in range(n)}
    _fill(rng, support, n, m, lambda i, j: True)
    return sorted(support)


def planted_problem(n: int, m: int, mu, seed: int = 0, shift: int = 1,
                    spread: int = 4) -> Tuple[SparseMatrix, TargetMarginals]:
    """A = D S E with dyadic diagonals, and targets equal to the marginals of S.

    S has total mass exactly 1 on a cycle support.  D and E hold powers
    2^-k with 0 <= k <= shift, so x_i = k_i ln 2, y_j = l_j ln 2 is an exact
    scaling and the targets are dyadic.
    """
    mu = _mu(mu)
    base = mu * (1 << (2 * shift))
    rng = np.random.default_rng([seed, n, m, 4])
    cells = _cycle_support(rng, n, m)
    vals = _values(rng, len(cells), base, spread)
    q = Fraction(1, 1 << QUANTUM)
    rest = (1 - sum(vals)) / q
    share, left = divmod(int(rest), len(vals))
    vals = [v + share * q for v in vals]
    vals[0] += left * q
    if sum(vals) != 1:
        raise PrecondViolated("mu needs to be dyadic with at most 24 - 2 * shift bits")
    a = rng.integers(0, shift + 1, n)
    b = rng.integers(0, shift + 1, n)
    r = [Fraction(0)] * n
    c = [Fraction(0)] * n
    trip = []
    for (i, j), v in zip(cells, vals):
        r[i] += v
        c[j] += v
        trip.append((i, j, v / (1 << int(a[i] + b[j]))))
    return SparseMatrix(n, trip), TargetMarginals(tuple(r), tuple(c))


def random_balanceable(n: int, m: int, mu, seed: int = 0, spread: int = 16) -> SparseMatrix:
    """Zero diagonal plus a random Hamiltonian cycle, so the graph is strongly connected."""
    mu = _mu(mu)
    if n < 2 or m < n or m > n * (n - 1):
        raise PrecondViolated("need n >= 2 and n <= m <= n(n-1)")
    rng = np.random.default_rng([seed, n, m, 1])
    order = rng.permutation(n)
    support = {(int(order[k]), int(order[(k + 1) % n])) for k in range(n)}
    _fill(rng, support, n, m, lambda i, j: i != j)
    cells = sorted(support)
    return SparseMatrix(n, [(i, j, v) for (i, j), v in zip(cells, _values(rng, len(cells), mu, spread))])


def random_positive(n: int, mu=None, seed: int = 0, spread: int = 4) -> SparseMatrix:
    """Dense matrix with log-uniform entries in [mu, spread * mu].

    mu defaults to the largest power of two with n^2 * spread * mu <= 1.
    """
    if mu is None:
        mu = Fraction(1, 1 << (spread * n * n - 1).bit_length())
    mu = _mu(mu)
    rng = np.random.default_rng([seed, n, 2])
    vals = _values(rng, n * n, mu, spread)
    return SparseMatrix(n, [(k // n, k % n, v) for k, v in enumerate(vals)])


def random_targets(n: int, seed: int = 0, spread: int = 4) -> TargetMarginals:
    """Positive dyadic marginals summing to 1, with max/min at most about `spread`."""
    rng = np.random.default_rng([seed, n, 3])
    w = rng.integers(1 << 12, spread << 12, size=(2, n))
    out = []
    for row in w:
        tot = int(row.sum())
        q = [Fraction(int(v) << 20, tot) for v in row]
        q = [Fraction(int(v), 1 << 20) for v in q]  # floor to 2^-20
        q[0] += 1 - sum(q)
        out.append(tuple(q))
    return TargetMarginals(out[0], out[1])


def gibbs_kernel(n: int, gamma=Fraction(1, 10), bits: int = 32) -> SparseMatrix:
    """Positive matrix proportional to exp(-((i - j) / n)^2 / gamma), entries multiples of 2^-bits.

    Small gamma makes entries span a range of about e^(1/gamma), which slows
    Sinkhorn down; this is the usual entropic transport kernel on a line.
    """
    g = float(as_fraction(gamma))
    w = np.exp(-(((np.arange(n)[:, None] - np.arange(n)[None, :]) / n) ** 2) / g)
    w = w / w.sum()
    raw = np.floor(w * 2.0**bits).astype(np.int64)
    if raw.min() < 1:
        raise PrecondViolated("gamma too small for the requested bit budget")
    return SparseMatrix(n, [(i, j, Fraction(int(raw[i, j]), 1 << bits)) for i in range(n) for j in range(n)])
