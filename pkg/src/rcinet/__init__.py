"""Decentralized robust control invariant sets for coupled linear systems.

Zonotopic set algebra, per-subsystem invariant-set synthesis through linear
programs, a compositional sweep that treats neighbor couplings as shrinking
disturbances, and the matching online set-invariance controller.
"""

from .compositional import (SweepState, SynthesisReport, convergence_metric,
                            coupling_disturbance, synth_network)
from .lp import (LpProblem, LpSolution, LpStatus, add_l1_objective, from_mps,
                 solve, to_mps)
from .network import (Coupling, NetworkError, NetworkSystem, Subsystem,
                      aggregate, parse_network, serialize_network)
from .rng import SeededRng
from .runtime import (ControlStep, NominalTrajectory, OneStepReport,
                      SimulationError, StateOutsideRci, TrajectoryLog,
                      invariance_control, load_nominal_trajectory,
                      simulate_closed_loop, verify_contract, verify_one_step)
from .scenarios import (gen_hvac, gen_random_field, gen_rotation,
                        make_hvac_setback_nominal, rotation_matrix)
from .single import (AllKInfeasible, ControllabilityWarning, RciContract,
                     build_rci_lp, fixed_point_residual, synth_single)
from .zonotope import (ContainmentBlock, Zonotope, ZonotopeError,
                       containment_block, contains_point, contains_zonotope,
                       linear_map, membership_residuals, minkowski_sum,
                       reduce_box, sample, vertices_2d)

__version__ = "0.1.0"

__all__ = [
    "AllKInfeasible",
    "ContainmentBlock",
    "ControlStep",
    "ControllabilityWarning",
    "Coupling",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "NetworkError",
    "NetworkSystem",
    "NominalTrajectory",
    "OneStepReport",
    "RciContract",
    "SeededRng",
    "SimulationError",
    "StateOutsideRci",
    "Subsystem",
    "SweepState",
    "SynthesisReport",
    "TrajectoryLog",
    "Zonotope",
    "ZonotopeError",
    "add_l1_objective",
    "aggregate",
    "build_rci_lp",
    "containment_block",
    "contains_point",
    "contains_zonotope",
    "convergence_metric",
    "coupling_disturbance",
    "fixed_point_residual",
    "from_mps",
    "gen_hvac",
    "gen_random_field",
    "gen_rotation",
    "invariance_control",
    "linear_map",
    "load_nominal_trajectory",
    "make_hvac_setback_nominal",
    "membership_residuals",
    "minkowski_sum",
    "parse_network",
    "reduce_box",
    "rotation_matrix",
    "sample",
    "serialize_network",
    "simulate_closed_loop",
    "solve",
    "synth_network",
    "synth_single",
    "to_mps",
    "verify_contract",
    "verify_one_step",
    "vertices_2d",
]
