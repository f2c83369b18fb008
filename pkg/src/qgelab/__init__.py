"""qgelab: desk-scale simulator and query-cost lab for adaptive gradient estimation.

The package is organized bottom-up:

- ``fermion``: sparse Jordan-Wigner ladder operators, k-body observable sets,
  particle-number sectors, and the sum-of-squares sector norm.
- ``statevector``: dense pure states, sector-random states, exact expectations.
- ``encode``: block encodings, LCU combination, eigenvalue polynomial
  transforms, uniform amplification.
- ``probe``: phase-gradient probe registers, QFT readout, noise models.
- ``engine``: the adaptive estimation loop, query ledger, contract checks.
- ``cost``: closed-form query accounting and method comparison tables.
- ``verify``: named cross-check suites behind the ``qgelab verify`` gate.
- ``cli``: the ``qgelab`` command.
"""

from .cost import C_MAX, KAPPA_R, CostParams, compare_table, crossover, total_queries
from .engine import (
    Problem,
    RunResult,
    ScheduleConfig,
    krdm_problem,
    run_adaptive,
    run_many,
)
from .fermion import (
    Observable,
    SectorLabel,
    binom_norm_formula,
    estimation_observables,
    krdm_observable_set,
    sum_squares_sector_norm,
)
from .probe import NoiseSpec
from .statevector import PureState, basis_state, expectations, random_sector_state

__version__ = "0.1.0"

__all__ = [
    "C_MAX",
    "KAPPA_R",
    "CostParams",
    "NoiseSpec",
    "Observable",
    "Problem",
    "PureState",
    "RunResult",
    "ScheduleConfig",
    "SectorLabel",
    "__version__",
    "basis_state",
    "binom_norm_formula",
    "compare_table",
    "crossover",
    "estimation_observables",
    "expectations",
    "krdm_observable_set",
    "krdm_problem",
    "random_sector_state",
    "run_adaptive",
    "run_many",
    "sum_squares_sector_norm",
    "total_queries",
]
