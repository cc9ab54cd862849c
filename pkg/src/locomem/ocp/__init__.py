from .costs import (
    ContactPlacement,
    ControlRegularization,
    CostTerm,
    QuadraticCost,
    RootPlacement,
    StateRegularization,
    SwingApex,
    SwingClearance,
    TerminalVelocity,
)
from .model import StepperModel, dynamics, quasi_static_controls, rollout, states_from_configurations
from .problem import CostWeights, OcProblem, make_multistep_problem, make_step_problem
from .solver import SolverConfig, SolverTrace, WarmStart, fddp, solve, warm_start_arrays


def total_cost(problem, q_traj, u_traj) -> float:
    """Running plus terminal cost of a configuration/control trajectory pair."""
    xs = problem.states_from_configurations(q_traj.values.T)
    return problem.cost(xs, u_traj.values.T)
