"""Evacuation planning toolkit: flow bounds, exact and heuristic plan solvers,
and a queue-based behavioural simulator for stress-testing plans."""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    Edge,
    EvacPath,
    EvacuationGraph,
    Node,
    NodeKind,
    TimeExpandedGraph,
    build_time_expanded_graph,
    enumerate_simple_paths,
    make_path,
    path_window,
    validate_instance,
)
from .lp import (  # noqa: F401
    EngineCapacityError,
    LpModel,
    LpSolution,
    SolveBudget,
    SolveStatus,
    solve_lp,
    solve_mip,
    warm_start,
)
from .flows import (  # noqa: F401
    FlowSolution,
    solve_ff,
    solve_ff_bar,
    solve_ff_e,
    solve_ff_i,
)
from .rf import RfResult, RfTooLarge, build_rf, rf_size_estimate, solve_rf_variant  # noqa: F401
from .cpg import (  # noqa: F401
    CostWeights,
    CpgConfig,
    CpgResult,
    run_cpg,
    run_cpg_bar,
    run_cpg_e,
)
from .plans import EvacuationPlan, PlanAssignment, verify_plan  # noqa: F401
from .instances import (  # noqa: F401
    GenParams,
    PRESETS,
    generate_synthetic,
    load,
    reduce_rn,
    save,
    scale_ix,
)
from .sim import (  # noqa: F401
    AgentPopulation,
    SimResult,
    apply_scenario,
    flow_to_agents,
    plan_to_agents,
    run_scenarios,
    simulate,
)
