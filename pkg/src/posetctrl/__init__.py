"""Decentralized control of poset-causal linear systems.

Subsystems ordered by a poset predict their downstream peers, difference the
predictions into local improvements, apply per-subsystem gains, and
aggregate back along the order.  The package provides the order-theoretic
core (exact zeta/Mobius matrices), the local-variable algebra, H2-optimal
gain synthesis through decoupled Riccati equations, closed-loop assembly
and simulation, the vectorized block-diagonalization check, and a discrete
pipeline that reconstructs disturbances exactly from one-step prediction
errors.
"""

from .algebra import (
    GainFamily,
    complete_from_downstream,
    d_pattern_mask,
    embed,
    is_member,
    local_product,
    mu_local,
    project_d,
    project_uo,
    zeta_local,
)
from .blockdiagram import build_vector_operators, check_block_diagonal, lift_plant
from .errors import (
    ConstructionError,
    ContractError,
    DivergenceError,
    NumericalError,
    PosetCtrlError,
    SpecFormatError,
    SynthesisError,
    UnknownElementError,
)
from .h2 import closed_loop_h2, column_oracle_costs, optimality_certificate
from .numlin import StateSpace, h2_norm_squared, is_hurwitz, solve_care, solve_lyapunov
from .poset import (
    OrderSets,
    Poset,
    from_cover_relations,
    from_relations,
    intervals,
    mobius_matrix,
    mobius_transform,
    order_sets,
    product,
    zeta_matrix,
    zeta_transform,
)
from .simulate import (
    Trace,
    YoulaFilter,
    random_youla_filter,
    simulate_continuous,
    simulate_discrete,
    youla_reconstruct,
)
from .synthesis import (
    ClosedLoop,
    ControllerRealization,
    PosetSystem,
    SeparationReport,
    assemble_closed_loop,
    control_law,
    controller_realization,
    interconnect,
    modified_closed_loop,
    optimal_gains,
    separation_report,
)

__version__ = "0.1.0"
