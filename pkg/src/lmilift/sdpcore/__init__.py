from .problem import ConicProblem, ConicSolution, ProblemError, SolverOptions, Status
from .solver import solve
from .sdpa import SdpaFormatError, read_sdpa, write_sdpa, dumps_sdpa, loads_sdpa

__all__ = [
    "ConicProblem",
    "ConicSolution",
    "ProblemError",
    "SolverOptions",
    "Status",
    "solve",
    "SdpaFormatError",
    "read_sdpa",
    "write_sdpa",
    "dumps_sdpa",
    "loads_sdpa",
]
