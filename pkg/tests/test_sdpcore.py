import numpy as np
import pytest

from lmilift.sdpcore import (
    ConicProblem,
    ProblemError,
    SdpaFormatError,
    SolverOptions,
    Status,
    dumps_sdpa,
    loads_sdpa,
    read_sdpa,
    solve,
    write_sdpa,
)
from oracles import barrier_sdp, random_sdp


def hankel_problem():
    # min y  s.t.  [[1, y], [y, 1]] >= 0
    B = np.zeros((2, 2, 2))
    B[0] = np.eye(2)
    B[1] = [[0, 1], [1, 0]]
    return ConicProblem(1, np.array([1.0]), [B])


def as_problem(c, A0, As):
    return ConicProblem(len(c), np.asarray(c), [np.concatenate([B0[None], np.stack(Bs)]) for B0, Bs in zip(A0, As)])


def test_hankel_minimum():
    sol = solve(hankel_problem())
    assert sol.status == Status.OPTIMAL
    assert abs(sol.objective + 1) <= 1e-8
    assert sol.primal_residual <= 1e-8


def test_optimal_dual_is_consistent():
    prob = hankel_problem()
    sol = solve(prob)
    Z = sol.dual[0]
    assert np.linalg.eigvalsh(Z)[0] >= -1e-8
    # <A_1, Z> = c_1 and strong duality: c^T y = -<A_0, Z>
    assert abs(np.sum(prob.blocks[0][1] * Z) - 1) <= 1e-7
    assert abs(sol.objective + np.sum(prob.blocks[0][0] * Z)) <= 1e-7


def test_infeasible_with_certificate():
    # [[y, 0], [0, -1 - y]] >= 0 needs y >= 0 and y <= -1
    B = np.zeros((2, 2, 2))
    B[0] = np.diag([0.0, -1.0])
    B[1] = np.diag([1.0, -1.0])
    prob = ConicProblem(1, np.array([0.0]), [B])
    sol = solve(prob)
    assert sol.status == Status.INFEASIBLE
    Z = sol.certificate[0]
    assert np.linalg.eigvalsh(Z)[0] >= -1e-9
    assert abs(np.sum(B[1] * Z)) <= 1e-7
    assert np.sum(B[0] * Z) == pytest.approx(-1.0, abs=1e-7)


def test_unbounded():
    # min y  s.t.  1 - y >= 0
    B = np.array([[[1.0]], [[-1.0]]])
    sol = solve(ConicProblem(1, np.array([1.0]), [B]))
    assert sol.status == Status.UNBOUNDED


def test_objective_on_invisible_variable_is_unbounded():
    B = np.array([[[1.0]], [[1.0]], [[0.0]]])
    sol = solve(ConicProblem(2, np.array([0.0, 1.0]), [B]))
    assert sol.status == Status.UNBOUNDED


def test_dependent_constraints_reduce():
    # y1 and y2 enter only through y1 + y2
    B = np.zeros((3, 2, 2))
    B[0] = np.eye(2)
    B[1] = B[2] = [[0, 1], [1, 0]]
    sol = solve(ConicProblem(2, np.array([1.0, 1.0]), [B]))
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(-1.0, abs=1e-8)


def test_no_variables():
    ok = ConicProblem(0, np.zeros(0), [np.eye(2)[None]])
    assert solve(ok).status == Status.OPTIMAL
    bad = ConicProblem(0, np.zeros(0), [-np.eye(2)[None]])
    sol = solve(bad)
    assert sol.status == Status.INFEASIBLE
    assert np.sum(bad.blocks[0][0] * sol.certificate[0]) == pytest.approx(-1.0)


def test_psd_cap():
    B = np.zeros((2, 30, 30))
    B[0] = np.eye(30)
    with pytest.raises(ProblemError):
        solve(ConicProblem(1, np.ones(1), [B]), SolverOptions(psd_cap=20))


def test_asymmetric_block_rejected():
    B = np.zeros((2, 2, 2))
    B[1, 0, 1] = 1.0
    with pytest.raises(ProblemError):
        ConicProblem(1, np.ones(1), [B])


def test_deterministic():
    rng = np.random.default_rng(4)
    prob = as_problem(*random_sdp(rng))
    a, b = solve(prob), solve(prob)
    assert a.status == b.status and np.array_equal(a.y, b.y)


@pytest.mark.parametrize("seed", range(10))
def test_against_barrier_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    for k in range(5):
        c, A0, As = random_sdp(rng, feasible=k != 0)
        status, value, _ = barrier_sdp(c, A0, As)
        sol = solve(as_problem(c, A0, As))
        assert sol.status.value == status
        if value is not None:
            assert abs(sol.objective - value) <= 1e-4


# -- SDPA ---------------------------------------------------------------------


def test_sdpa_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    for k in range(10):
        prob = as_problem(*random_sdp(rng))
        prob.tag = f"p{k}"
        write_sdpa(prob, tmp_path / "p.dat-s")
        back = read_sdpa(tmp_path / "p.dat-s")
        assert back.tag == prob.tag
        assert np.array_equal(back.c, prob.c)
        assert len(back.blocks) == len(prob.blocks)
        for a, b in zip(back.blocks, prob.blocks):
            assert np.array_equal(a, b)


def test_sdpa_scalar_blocks_written_as_diagonal():
    B = np.array([[[2.0]], [[1.0]]])
    text = dumps_sdpa(ConicProblem(1, np.array([1.0]), [B, B]))
    assert "-1 -1 = bLOCKsTRUCT" in text


def test_sdpa_reads_grouped_diagonal_block():
    text = "1 = mDIM\n1 = nBLOCK\n-2 = bLOCKsTRUCT\n1.0\n0 1 1 1 -1.0\n1 1 2 2 1.0\n"
    prob = loads_sdpa(text)
    assert prob.block_sizes == [1, 1]
    assert prob.blocks[0][0, 0, 0] == 1.0
    assert prob.blocks[1][1, 0, 0] == 1.0


@pytest.mark.parametrize(
    "text,line",
    [
        ("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n1 1 2 1 1.0\n", 5),  # lower triangle
        ("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n1 1 3 3 1.0\n", 5),  # outside block
        ("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n2 1 1 1 1.0\n", 5),  # matno too large
        ("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n1 1 1 1 abc\n", 5),
        ("1 = mDIM\n2 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n", 3),
    ],
)
def test_sdpa_errors_carry_position(text, line):
    with pytest.raises(SdpaFormatError) as e:
        loads_sdpa(text)
    assert e.value.line == line


def test_sdpa_block_line_mixes_psd_and_scalar():
    big = np.zeros((2, 3, 3))
    big[0] = np.eye(3)
    small = np.array([[[1.0]], [[1.0]]])
    text = dumps_sdpa(ConicProblem(1, np.array([1.0]), [big, small]))
    assert "3 -1 = bLOCKsTRUCT" in text
