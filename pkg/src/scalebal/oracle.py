"""Sparse-oracle matrix model with a metered query ledger.

Indices are 0-based throughout the Python API, except for the three
``query_*`` oracle methods.  Those mirror the black-box oracle, which uses
1-based positions and answers 0 for "no k-th potentially nonzero entry".
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import mpmath

from .errors import MatrixFormatError, OutOfRange
from .fixedpoint import RATIONAL_BIT_CAP, FixedPoint, as_fraction, check_rational, round_div

# high-precision context for the exact reference evaluator (never metered)
EXACT_PREC = 160
mpx = mpmath.MPContext()
mpx.prec = EXACT_PREC


class QueryLedger:
    """Monotone counters of oracle reads; increments are lock-protected."""

    FIELDS = (
        "entry_queries",
        "row_index_queries",
        "col_index_queries",
        "scaling_vector_reads",
        "quantum_charged_queries",
    )

    def __init__(self):
        self._lock = threading.Lock()
        for f in self.FIELDS:
            setattr(self, f, 0)

    def charge(self, entry=0, row_index=0, col_index=0, vector=0, quantum=0):
        if min(entry, row_index, col_index, vector, quantum) < 0:
            raise ValueError("ledger counters never decrease")
        with self._lock:
            self.entry_queries += entry
            self.row_index_queries += row_index
            self.col_index_queries += col_index
            self.scaling_vector_reads += vector
            self.quantum_charged_queries += quantum

    @property
    def classical_queries(self) -> int:
        return self.entry_queries + self.row_index_queries + self.col_index_queries

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return {f: getattr(self, f) for f in self.FIELDS}


class LineView:
    """One row or column of a SparseMatrix as seen by an estimator."""

    __slots__ = ("matrix", "axis", "index", "indices", "values")

    def __init__(self, matrix, axis, index, indices, values):
        self.matrix = matrix
        self.axis = axis
        self.index = index
        self.indices = indices
        self.values = values

    def __len__(self):
        return len(self.indices)

    def encoded(self, b: int) -> Tuple[int, ...]:
        """Entries as raw ints in (0, b) format (saturating just below 1)."""
        return self.matrix._encoded(self.axis, self.index, b)

    def charge_classical(self):
        s = len(self.indices)
        led = self.matrix.ledger
        if self.axis == "row":
            led.charge(entry=s, row_index=s, vector=s)
        else:
            led.charge(entry=s, col_index=s, vector=s)


class SparseMatrix:
    """Non-negative rational matrix with row and column adjacency lists.

    ``entries`` is an iterable of 0-based (i, j, value) triples.  Explicit
    zeros are allowed and stay in the lists as potentially-nonzero slots.
    """

    def __init__(
        self,
        n: int,
        entries: Iterable[Tuple[int, int, object]],
        mu=None,
        total_mass_cap: bool = True,
        cap: int = RATIONAL_BIT_CAP,
        require_nonempty: bool = True,
    ):
        if n < 1:
            raise MatrixFormatError("dimension must be positive")
        self.n = n
        self.total_mass_cap = total_mass_cap
        self._lookup: Dict[Tuple[int, int], Fraction] = {}
        rows: List[List[Tuple[int, Fraction]]] = [[] for _ in range(n)]
        cols: List[List[Tuple[int, Fraction]]] = [[] for _ in range(n)]
        for i, j, v in entries:
            if not (0 <= i < n and 0 <= j < n):
                raise MatrixFormatError(f"entry ({i},{j}) outside {n}x{n}")
            if (i, j) in self._lookup:
                raise MatrixFormatError(f"duplicate entry ({i + 1},{j + 1})")
            try:
                v = check_rational(v, cap)
            except ValueError as exc:
                raise MatrixFormatError(str(exc)) from None
            if v > 1:
                raise MatrixFormatError(f"entry ({i + 1},{j + 1}) = {v} exceeds 1")
            self._lookup[(i, j)] = v
            rows[i].append((j, v))
            cols[j].append((i, v))
        for lst in rows + cols:
            lst.sort(key=lambda t: t[0])
        if require_nonempty:
            for k in range(n):
                if not rows[k]:
                    raise MatrixFormatError(f"row {k + 1} has no entries")
                if not cols[k]:
                    raise MatrixFormatError(f"column {k + 1} has no entries")
        self.row_idx = [tuple(j for j, _ in r) for r in rows]
        self.row_val = [tuple(v for _, v in r) for r in rows]
        self.col_idx = [tuple(i for i, _ in c) for c in cols]
        self.col_val = [tuple(v for _, v in c) for c in cols]
        nz = [v for v in self._lookup.values() if v > 0]
        if not nz:
            raise MatrixFormatError("matrix has no nonzero entry")
        self.mass = sum(nz, Fraction(0))
        if total_mass_cap and self.mass > 1:
            raise MatrixFormatError(f"total mass {self.mass} exceeds 1")
        self.nu = max(nz)
        true_mu = min(nz)
        if mu is None:
            self.mu = true_mu
        else:
            mu = as_fraction(mu)
            if true_mu < mu:
                raise MatrixFormatError(f"nonzero entry {true_mu} below declared mu {mu}")
            self.mu = mu
        self.ledger = QueryLedger()
        self._enc_cache: Dict[Tuple[str, int, int], Tuple[int, ...]] = {}

    # ---- structure
    @property
    def m(self) -> int:
        return len(self._lookup)

    def triples(self) -> List[Tuple[int, int, Fraction]]:
        return [(i, j, v) for i in range(self.n) for j, v in zip(self.row_idx[i], self.row_val[i])]

    def row(self, i: int) -> LineView:
        return LineView(self, "row", i, self.row_idx[i], self.row_val[i])

    def col(self, j: int) -> LineView:
        return LineView(self, "col", j, self.col_idx[j], self.col_val[j])

    def get(self, i: int, j: int) -> Fraction:
        """Unmetered read, for reference computations."""
        return self._lookup.get((i, j), Fraction(0))

    def row_sums(self) -> List[Fraction]:
        return [sum(v, Fraction(0)) for v in self.row_val]

    def col_sums(self) -> List[Fraction]:
        return [sum(v, Fraction(0)) for v in self.col_val]

    def to_dense(self) -> List[List[Fraction]]:
        d = [[Fraction(0)] * self.n for _ in range(self.n)]
        for (i, j), v in self._lookup.items():
            d[i][j] = v
        return d

    def is_entrywise_positive(self) -> bool:
        return self.m == self.n * self.n and all(v > 0 for v in self._lookup.values())

    def _encoded(self, axis: str, index: int, b: int) -> Tuple[int, ...]:
        key = (axis, index, b)
        enc = self._enc_cache.get(key)
        if enc is None:
            vals = self.row_val[index] if axis == "row" else self.col_val[index]
            top = (1 << b) - 1
            enc = tuple(min(top, round_div(v.numerator << b, v.denominator)) for v in vals)
            self._enc_cache[key] = enc
        return enc

    # ---- metered oracle (1-based, as in the black-box model)
    def _check(self, i: int):
        if not 1 <= i <= self.n:
            raise OutOfRange(f"index {i} outside [1, {self.n}]")

    def query_entry(self, i: int, j: int) -> Fraction:
        self._check(i)
        self._check(j)
        self.ledger.charge(entry=1)
        return self._lookup.get((i - 1, j - 1), Fraction(0))

    def query_row_index(self, i: int, k: int) -> int:
        self._check(i)
        if k < 1:
            raise OutOfRange(f"position {k} must be >= 1")
        self.ledger.charge(row_index=1)
        lst = self.row_idx[i - 1]
        return lst[k - 1] + 1 if k <= len(lst) else 0

    def query_col_index(self, j: int, k: int) -> int:
        self._check(j)
        if k < 1:
            raise OutOfRange(f"position {k} must be >= 1")
        self.ledger.charge(col_index=1)
        lst = self.col_idx[j - 1]
        return lst[k - 1] + 1 if k <= len(lst) else 0

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, m={self.m}, mu={self.mu})"


@dataclass(frozen=True)
class TargetMarginals:
    r: Tuple[Fraction, ...]
    c: Tuple[Fraction, ...]

    def __post_init__(self):
        r = tuple(as_fraction(v) for v in self.r)
        c = tuple(as_fraction(v) for v in self.c)
        if len(r) != len(c):
            raise MatrixFormatError("r and c differ in length")
        if any(v <= 0 for v in r + c):
            raise MatrixFormatError("target marginals must be positive")
        if sum(r) != 1 or sum(c) != 1:
            raise MatrixFormatError("target marginals must each sum to exactly 1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)

    @classmethod
    def uniform(cls, n: int) -> "TargetMarginals":
        u = (Fraction(1, n),) * n
        return cls(u, u)

    @property
    def n(self) -> int:
        return len(self.r)


# ---------------------------------------------------------------------------
# file formats


def _parse_rational(tok: str, where: str) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise MatrixFormatError(f"{where}: bad rational {tok!r}") from None


def _content_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_matrix(text: str, **kwargs) -> SparseMatrix:
    lines = list(_content_lines(text))
    if not lines:
        raise MatrixFormatError("empty matrix file")
    head = lines[0][1].split()
    if len(head) != 2:
        raise MatrixFormatError("header must be 'n m'")
    n, m = int(head[0]), int(head[1])
    body = lines[1:]
    if len(body) != m:
        raise MatrixFormatError(f"header announces {m} entries, found {len(body)}")
    entries = []
    for lineno, line in body:
        parts = line.split()
        if len(parts) != 3:
            raise MatrixFormatError(f"line {lineno}: expected 'i j num/den'")
        entries.append((int(parts[0]) - 1, int(parts[1]) - 1, _parse_rational(parts[2], f"line {lineno}")))
    return SparseMatrix(n, entries, **kwargs)


def format_matrix(A: SparseMatrix) -> str:
    out = [f"{A.n} {A.m}"]
    out += [f"{i + 1} {j + 1} {v.numerator}/{v.denominator}" for i, j, v in A.triples()]
    return "\n".join(out) + "\n"


def parse_vector(text: str, n: Optional[int] = None) -> Tuple[Fraction, ...]:
    vals: Dict[int, Fraction] = {}
    for lineno, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise MatrixFormatError(f"line {lineno}: expected 'i num/den'")
        i = int(parts[0])
        if i in vals:
            raise MatrixFormatError(f"line {lineno}: duplicate index {i}")
        vals[i] = _parse_rational(parts[1], f"line {lineno}")
    size = n if n is not None else len(vals)
    if sorted(vals) != list(range(1, size + 1)):
        raise MatrixFormatError(f"marginals must list indices 1..{size} exactly once")
    return tuple(vals[i] for i in range(1, size + 1))


def format_vector(v: Sequence[Fraction]) -> str:
    return "".join(f"{i + 1} {q.numerator}/{q.denominator}\n" for i, q in enumerate(v))


def load_matrix(path, **kwargs) -> SparseMatrix:
    with open(path) as fh:
        return parse_matrix(fh.read(), **kwargs)


def load_targets(spec: str, n: int) -> TargetMarginals:
    """Read targets from 'r.txt' (used for both sides) or 'r.txt,c.txt'."""
    paths = spec.split(",")
    if len(paths) > 2:
        raise MatrixFormatError("targets must be one or two paths")
    vecs = []
    for p in paths:
        with open(p) as fh:
            vecs.append(parse_vector(fh.read(), n))
    return TargetMarginals(vecs[0], vecs[-1])


# ---------------------------------------------------------------------------
# exact reference evaluator


def to_mp(v):
    """Convert FixedPoint / Fraction / number to an mpf of the exact context."""
    if isinstance(v, FixedPoint):
        return mpx.ldexp(mpx.mpf(v.raw), -v.b2)
    if isinstance(v, Fraction):
        return mpx.mpf(v.numerator) / v.denominator
    return mpx.mpf(v)


def _exp_vec(v):
    return [mpx.exp(to_mp(t)) for t in v]


def scaled_marginals(A: SparseMatrix, x, y):
    """Row and column sums of A(x, y) = (A_ij e^{x_i + y_j})."""
    ex, ey = _exp_vec(x), _exp_vec(y)
    r = [mpx.zero] * A.n
    c = [mpx.zero] * A.n
    for i in range(A.n):
        for j, v in zip(A.row_idx[i], A.row_val[i]):
            if v:
                t = to_mp(v) * ex[i] * ey[j]
                r[i] += t
                c[j] += t
    return r, c


def row_marginal_exact(A: SparseMatrix, x, y, l: int):
    ey = _exp_vec(y)
    s = mpx.fsum(to_mp(v) * ey[j] for j, v in zip(A.row_idx[l], A.row_val[l]))
    return s * mpx.exp(to_mp(x[l]))


def col_marginal_exact(A: SparseMatrix, x, y, l: int):
    ex = _exp_vec(x)
    s = mpx.fsum(to_mp(v) * ex[i] for i, v in zip(A.col_idx[l], A.col_val[l]))
    return s * mpx.exp(to_mp(y[l]))
