"""kantlab: a desk-scale numerical laboratory for transport problems whose
costs depend on conditional measures."""

from .errors import (
    AlignmentError,
    BalanceError,
    ContractError,
    DomainError,
    InfeasibleError,
    KantLabError,
    NonconvergenceError,
    OrderViolationError,
    RepresentationError,
)
from .measures import (
    ConditionalKernel,
    DiscreteMeasure,
    GridDensity1D,
    MomentMap,
    g_eval,
    measure_from_json,
    mix,
    mixture,
    pushforward,
    sample_grid,
)
from .lp_transport import (
    LinearProgram,
    LPSolution,
    TransportPlan,
    kr_norm,
    kr_to_segment,
    load_cost_csv,
    lp_solve,
    segment_kr_min_1d,
    segment_kr_min_grid,
    solve_transport,
    total_variation,
    verify_strong_monotonicity,
    wasserstein1,
)
from .convex_order import (
    ConvexOrderCertificate,
    LevelFunctional,
    PotentialFunction1D,
    check_convex_order_1d,
    check_convex_order_lp,
    level_set_convexity_probe,
    martingale_feasibility,
    mean_preserving_split,
    quick_dominated_1d,
)
from .martingale import MartingaleCoupling, MongeMap, build_martingale_coupling, glue
from .nonlinear import (
    CostSpec,
    Dictionary,
    FixedBarycenterPlan,
    MongeCDOptions,
    MongeCDResult,
    collapse_to_kernel,
    cost_from_json,
    eval_J_gp,
    eval_J_xp,
    eval_J_xyp,
    map_to_plan,
    plan_to_map,
    solve_fixed_barycenter,
    solve_monge_cd,
)
from .sweeps import (
    SweepRow,
    DyadicKernelFixture,
    build_segment_map_fixture,
    build_folding_map_fixture,
    build_dyadic_kernel,
    map_cost,
    rows_to_csv,
    rows_to_json,
    run_map_sweep,
    run_kernel_sweep,
)

__version__ = "0.1.0"
