import threading
from fractions import Fraction

import pytest

from scalebal.errors import MatrixFormatError, OutOfRange
from scalebal.oracle import (
    SparseMatrix,
    TargetMarginals,
    col_marginal_exact,
    format_matrix,
    format_vector,
    load_targets,
    mpx,
    parse_matrix,
    parse_vector,
    row_marginal_exact,
    scaled_marginals,
)

B0 = [(0, 0, Fraction(2, 9)), (0, 1, Fraction(4, 9)), (1, 0, Fraction(1, 9)), (1, 1, Fraction(2, 9))]


def test_queries_one_based_and_metered():
    A = SparseMatrix(2, [(0, 0, Fraction(1, 2)), (1, 1, Fraction(1, 4))])
    before = A.ledger.classical_queries
    assert A.query_entry(1, 1) == Fraction(1, 2)
    assert A.ledger.classical_queries == before + 1
    assert A.query_row_index(1, 1) == 1
    assert A.query_row_index(1, 5) == 0
    assert A.query_col_index(2, 1) == 2
    with pytest.raises(OutOfRange):
        A.query_entry(3, 1)
    snap = A.ledger.snapshot()
    assert snap["entry_queries"] == 1 and snap["row_index_queries"] == 2 and snap["col_index_queries"] == 1


def test_mass_and_mu():
    A = SparseMatrix(2, B0)
    assert A.mass == 1 and A.mu == Fraction(1, 9) and A.m == 4
    assert A.row_sums() == [Fraction(6, 9), Fraction(3, 9)]


def test_rejects_bad_input():
    with pytest.raises(MatrixFormatError):
        SparseMatrix(2, [(0, 0, Fraction(1, 2)), (0, 0, Fraction(1, 4)), (1, 1, Fraction(1, 8))])
    with pytest.raises(MatrixFormatError):
        SparseMatrix(2, [(0, 0, Fraction(3, 4)), (1, 1, Fraction(1, 2))])  # mass above 1
    with pytest.raises(MatrixFormatError):
        SparseMatrix(2, [(0, 0, Fraction(1, 2))])  # empty row 2
    with pytest.raises(MatrixFormatError):
        SparseMatrix(2, [(0, 2, Fraction(1, 2))])


def test_explicit_zero_kept_as_slot():
    A = SparseMatrix(2, [(0, 0, Fraction(1, 2)), (0, 1, 0), (1, 1, Fraction(1, 4))])
    assert A.m == 3 and A.mu == Fraction(1, 4)
    assert A.query_row_index(1, 2) == 2


def test_row_col_consistency():
    A = SparseMatrix(2, B0)
    rows = sorted((i, j, v) for i in range(2) for j, v in zip(A.row(i).indices, A.row(i).values))
    cols = sorted((i, j, v) for j in range(2) for i, v in zip(A.col(j).indices, A.col(j).values))
    assert rows == cols == sorted(B0)


def test_exact_marginals():
    A = SparseMatrix(2, B0)
    assert abs(row_marginal_exact(A, [0, 0], [0, 0], 0) - mpx.mpf(6) / 9) < mpx.mpf(2) ** -150
    x = [mpx.log(mpx.mpf(3) / 4), mpx.log(mpx.mpf(3) / 2)]
    yv = [mpx.log(mpx.mpf(3) / 2), mpx.log(mpx.mpf(3) / 4)]
    assert abs(row_marginal_exact(A, x, yv, 0) - mpx.mpf(1) / 2) < mpx.mpf(2) ** -150
    assert abs(col_marginal_exact(A, x, yv, 1) - mpx.mpf(1) / 2) < mpx.mpf(2) ** -150
    r, c = scaled_marginals(A, [Fraction(1, 3), 0], [0, Fraction(-1, 5)])
    assert abs(mpx.fsum(r) - mpx.fsum(c)) < mpx.mpf(2) ** -150


def test_uniform_matrix_marginals():
    n = 4
    A = SparseMatrix(n, [(i, j, Fraction(1, n * n)) for i in range(n) for j in range(n)])
    for i in range(n):
        assert abs(row_marginal_exact(A, [0] * n, [0] * n, i) - mpx.mpf(1) / n) < mpx.mpf(2) ** -150


def test_targets_validation():
    with pytest.raises(ValueError):
        TargetMarginals((Fraction(1, 2), Fraction(1, 3)), (Fraction(1, 2), Fraction(1, 2)))
    with pytest.raises(ValueError):
        TargetMarginals((Fraction(1), Fraction(0)), (Fraction(1, 2), Fraction(1, 2)))
    assert TargetMarginals.uniform(4).r == (Fraction(1, 4),) * 4


def test_file_round_trip(tmp_path):
    A = SparseMatrix(2, B0)
    B = parse_matrix(format_matrix(A))
    assert B.triples() == A.triples()
    text = "# comment\n2 1\n1 1 1/2\n"
    with pytest.raises(MatrixFormatError):
        parse_matrix(text)  # row 2 empty
    assert parse_vector(format_vector([Fraction(1, 3), Fraction(2, 3)])) == (Fraction(1, 3), Fraction(2, 3))
    with pytest.raises(MatrixFormatError):
        parse_vector("1 1/2\n1 1/2\n")
    r = tmp_path / "r.txt"
    c = tmp_path / "c.txt"
    r.write_text("1 1/4\n2 3/4\n")
    c.write_text("1 1/2\n2 1/2\n")
    t = load_targets(f"{r},{c}", 2)
    assert t.r == (Fraction(1, 4), Fraction(3, 4)) and t.c == (Fraction(1, 2),) * 2
    assert load_targets(str(r), 2).c == t.r


def test_ledger_concurrent_increments():
    A = SparseMatrix(2, B0)

    def work():
        for _ in range(2000):
            A.query_entry(1, 2)

    ts = [threading.Thread(target=work) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert A.ledger.entry_queries == 8000
