"""Graph filtering and vertex-level inverse filtering on spatially
distributed networks."""

from .filters import (
    DiagonalPreconditioner,
    GraphFilter,
    Signal,
    SingularValues,
    SpectralEstimate,
    SymmetricOperator,
    apply,
    build_denoise_filter,
    build_fig1_filter,
    compose,
    extreme_singular_values,
    geodesic_width,
    laplacians,
    power_spectral_radius,
    schur_norm,
)
from .graphs import (
    GenerationError,
    Graph,
    HopNeighborhood,
    ball,
    geodesic_distance,
    knn_graph,
    random_geometric_graph,
)
from .preconditioners import (
    DominanceCheck,
    build_pgda_preconditioner,
    build_spgda_preconditioner,
    check_dominance,
    normalized_filter,
)
from .sdn import AgentState, RangeViolationError, Round, SdnNetwork
from .solvers import (
    METHODS,
    MethodParams,
    NumericError,
    SolveTrace,
    SolverConfig,
    direct_solve_oracle,
    imia_diagonal,
    iteration_matrix,
    optimal_step,
    solve,
)

__version__ = "0.1.0"
