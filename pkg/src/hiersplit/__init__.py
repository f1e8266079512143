"""hiersplit: hierarchical convex optimization via proximal splitting operators.

Expresses the solution set of  min f + sum_i g_i(A_i .)  as the fixed-point
set of computable nonexpansive operators (Douglas-Rachford and linearized
augmented-Lagrangian variants) and minimizes a smooth second-stage criterion
over it with the hybrid steepest descent method.  Ships a hierarchical SVM and
a hierarchical TREX estimator built on that machinery, plus a CLI harness.
"""

from ._kern import backend_name
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    HiersplitError,
    NumericalError,
    StructuralError,
)
from .hsdm import (
    HierProblem,
    StepSchedule,
    hsdm_drs_I,
    hsdm_drs_II,
    hsdm_generic,
    hsdm_lal,
    hsdm_lal_strong,
)
from .linop import (
    GramSolver,
    LinearMap,
    StackedMap,
    adjoint_check,
    gram_solve,
    opnorm_estimate,
)
from .prox import (
    BallIndicator,
    BoxIndicator,
    HingeLoss,
    L1Norm,
    MatrixQuadObjective,
    MoreauEnvelope,
    NearestPointObjective,
    PartialSquaredNorm,
    PerspectiveQ,
    PointIndicator,
    Proximable,
    Scaled,
    SemiOrthogonalComposition,
    SeparableSum,
    Smooth,
    SquaredDeviation,
    Zero,
    ZeroSmooth,
    moreau_envelope,
    project_ball,
    prox_conjugate,
    prox_hinge,
    prox_perspective,
    prox_semiorthogonal,
    soft_threshold,
)
from .splitting import (
    FixedPointOperator,
    KMConfig,
    SplitProblem,
    drs_operator,
    drs_product_I,
    drs_product_II,
    km_iterate,
    lal_operator,
)
from .svm import (
    Dataset,
    LinearClassifier,
    SvmConfig,
    error_count,
    hinge_loss,
    iris_subsets,
    m2lehl_train,
    original_svm_qp,
    softmargin_train,
)
from .trace import IterTrace
from .trex import (
    RegressionData,
    TrexResult,
    TrexSpec,
    htrex_solve,
    htrex_subproblem,
    smooth_diff_psi,
    synth_generate,
    trex_solve,
    trex_subproblem,
)

__version__ = "0.1.0"
