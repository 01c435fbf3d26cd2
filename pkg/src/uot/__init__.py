"""Unbalanced, entropy-regularized optimal transport on discrete measures."""

from .entropies import (KL, TV, Balanced, Berg, Entropy, Power, Range,
                        feasible, hellinger, parse_entropy)
from .errors import (DomainError, FDDomainError, InfeasibleError,
                     InvalidMeasureError, UnsupportedEntropyError, UotError)
from .divergences import (DivergenceValue, Gradients, dual_value,
                          grad_positions, grad_weights, hausdorff_divergence,
                          ot_eps, sinkhorn_divergence, sinkhorn_entropy)
from .flows import FlowParams, FlowState, flow_step, run_flow
from .lambertw import lambert_w, lambert_w_log
from .measures import (CostSpec, DiscreteMeasure, cost_matrix, load_measure,
                       new_measure, total_mass)
from .oracle import (GapReport, dirac_pair_value, duality_gap, fd_gradient,
                     primal_cost)
from .sinkhorn import (DualPotentials, SolveOptions, SolveReport, extrapolate,
                       half_update, implicit_plan, plan_matrix, softmin,
                       solve, solve_symmetric)

__version__ = "0.1.0"

__all__ = [
    "KL", "TV", "Balanced", "Berg", "Entropy", "Power", "Range",
    "feasible", "hellinger", "parse_entropy",
    "DomainError", "FDDomainError", "InfeasibleError", "InvalidMeasureError",
    "UnsupportedEntropyError", "UotError",
    "DivergenceValue", "Gradients", "dual_value", "grad_positions",
    "grad_weights", "hausdorff_divergence", "ot_eps", "sinkhorn_divergence",
    "sinkhorn_entropy",
    "FlowParams", "FlowState", "flow_step", "run_flow",
    "lambert_w", "lambert_w_log",
    "CostSpec", "DiscreteMeasure", "cost_matrix", "load_measure",
    "new_measure", "total_mass",
    "GapReport", "dirac_pair_value", "duality_gap", "fd_gradient",
    "primal_cost",
    "DualPotentials", "SolveOptions", "SolveReport", "extrapolate",
    "half_update", "implicit_plan", "plan_matrix", "softmin", "solve",
    "solve_symmetric",
]
