from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"
    NUMERICAL_LIMIT = "NUMERICAL_LIMIT"


class ProblemError(ValueError):
    pass


@dataclass
class ConicProblem:
    """``min c^T y  s.t.  F_k(y) = A_k0 + sum_j y_j A_kj >= 0`` for every block ``k``.

    Each block is stored densely as an array of shape ``(nvars + 1, d, d)``
    whose slice 0 is the constant matrix. A block of size 1 is a scalar
    inequality.
    """

    nvars: int
    c: np.ndarray
    blocks: list[np.ndarray] = field(default_factory=list)
    tag: str = ""

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.c.shape != (self.nvars,):
            raise ProblemError(f"cost vector has length {self.c.size}, expected {self.nvars}")
        blocks = []
        for k, b in enumerate(self.blocks):
            b = np.asarray(b, dtype=float)
            if b.ndim != 3 or b.shape[0] != self.nvars + 1 or b.shape[1] != b.shape[2] or b.shape[1] == 0:
                raise ProblemError(f"block {k} has shape {b.shape}")
            if not np.array_equal(b, np.swapaxes(b, 1, 2)):
                raise ProblemError(f"block {k} has a non-symmetric coefficient matrix")
            blocks.append(b)
        self.blocks = blocks

    @property
    def block_sizes(self) -> list[int]:
        return [b.shape[1] for b in self.blocks]

    @property
    def psd_dim(self) -> int:
        return sum(self.block_sizes)

    def slack(self, y) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        return [b[0] + np.tensordot(y, b[1:], axes=1) for b in self.blocks]

    def min_eig(self, y) -> float:
        return min((float(np.linalg.eigvalsh(s)[0]) for s in self.slack(y)), default=np.inf)

    def objective(self, y) -> float:
        return float(self.c @ np.asarray(y, dtype=float))

    def copy(self) -> ConicProblem:
        return ConicProblem(self.nvars, self.c.copy(), [b.copy() for b in self.blocks], self.tag)


@dataclass
class ConicSolution:
    status: Status
    y: np.ndarray
    objective: float
    gap: float
    primal_residual: float
    dual: list[np.ndarray] | None = None
    iterations: int = 0
    # for INFEASIBLE: Z >= 0 with <A_kj, Z_k> ~ 0 and sum <A_k0, Z_k> = -1
    certificate: list[np.ndarray] | None = None
    certificate_residual: float = float("nan")

    @property
    def feasible(self) -> bool:
        return self.status == Status.OPTIMAL


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    infeas_tol: float = 1e-8
    max_iter: int = 200
    psd_cap: int = 400
    step_fraction: float = 0.98
