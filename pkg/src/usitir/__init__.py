"""Work extraction, controllability and engine cycles for quantum information heat engines."""
from .config import Tolerances, get_tolerances, use_tolerances
from .control import (
    ControlSet,
    CtSolution,
    c2,
    collective_z,
    control_set_from_label,
    ct_search_generic,
    ct_solve_c2,
    is_dmc,
    lie_closure_dim,
    local_common,
    local_independent,
    spectrum_shift_match,
    unitarily_equivalent,
)
from .cycle import (
    CycleTrace,
    EngineSpec,
    brillouin_mu,
    polarized_qubit,
    closed_form_cycle_work,
    optimal_bf,
    run_1mqihe,
    run_1mqihe_feedback,
    run_2mqihe,
    usitir_stage_machine,
)
from .errors import *  # noqa: F401,F403
from .operators import (
    DensityMatrix,
    HermitianOperator,
    HilbertSpace,
    bell_state,
    ket_state,
    occupation_state,
    partial_trace,
    tensor,
    werner_state,
)
from .oracle import brute_force_su, random_density_matrix
from .thermo import ThermalContext, gibbs_state, relative_entropy, von_neumann_entropy
from .work import (
    HStarResult,
    WorkReport,
    extractable_work,
    feedback_work,
    find_h_star,
    optimal_work,
    post_measurement_states,
    uncontrollable_entropy,
    szilard_summary,
)

__version__ = "0.1.0"
