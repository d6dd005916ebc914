"""GCN-reparametrized gradient flows on sparse graphs.

A sparse-graph optimization engine: heat diffusion, Kuramoto and
Hopf-Kuramoto synchronization, and H0 point-cloud persistence, each
optimizable directly or through a graph-convolutional reparametrization
that acts as a cheap quasi-Newton preconditioner, plus a benchmark
harness measuring iteration and wall-clock speedups of the two-stage
hybrid scheme.
"""

from .errors import GraphFlowError
from .gcn import (
    Affine,
    AsSquared,
    BinomialInvSqrt,
    GcnModel,
    IMinusAs,
    Identity,
    NormAdj,
    PhaseSigmoid,
    binomial_inv_sqrt_apply,
    build_gcn,
    build_propagation,
    load_checkpoint,
    propagation_matrix,
    save_checkpoint,
)
from .graphs import (
    SBM,
    RGG,
    Circle,
    EdgeListFile,
    Lattice2D,
    Lattice3D,
    SparseGraph,
    Tree,
    degree_vector,
    estimate_top_eigenvalue,
    from_edge_list,
    generate,
    laplacian,
    normalized_adjacency,
    read_edge_list,
    to_edge_list,
    write_edge_list,
)
from .losses import (
    BoundaryCondition,
    HeatProblem,
    HopfKuramotoProblem,
    HopfParams,
    KuramotoProblem,
    heat_direct_solve,
    heat_eval,
    hessian_at_zero,
    hopf_kuramoto_eval,
    kuramoto_eval,
    order_parameter,
)
from .optimizers import (
    OptimizerConfig,
    OptimizerState,
    accumulate_G,
    full_matrix_step,
    init_state,
    read_G,
    step,
)
from .persistence import (
    PersistenceDiagram,
    PersistenceProblem,
    PointCloud,
    default_filtration,
    h0_diagram,
    persistence_loss,
    read_cloud_csv,
    rips_adjacency,
    sample_cloud,
    write_cloud_csv,
)
from .runner import (
    PrefitResult,
    RunRecord,
    SpeedupReport,
    StoppingRule,
    convergence_check,
    prefit,
    run_hybrid,
    run_linear,
    run_reparam,
    speedup,
)
from .sparse import SparseMatrix
from .theory import (
    estimate_G_at_init,
    ideal_jacobian_dense,
    ntk_linear,
    rate_of_loss_drop,
)

__version__ = "0.1.0"
