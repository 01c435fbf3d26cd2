"""Particle gradient flow minimizing ``alpha -> S_eps(alpha, beta)``.

Particles carry positions ``x_i`` and mass parameters ``r_i`` with
``alpha_i = r_i^2``; positions take forward gradient steps, masses take
multiplicative (mirror) steps, so they stay positive by construction.
Successive solves are warm-started from the previous step's potentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .divergences import dual_value, sinkhorn_entropy
from .entropies import Balanced, Entropy, KL
from .errors import DomainError, UnsupportedEntropyError
from .measures import CostSpec, DiscreteMeasure
from .sinkhorn import DualPotentials, SolveOptions, plan_matrix, solve, solve_symmetric


@dataclass
class FlowState:
    """Particle positions and mass parameters (weights are ``r**2``)."""

    positions: np.ndarray
    r: np.ndarray
    step: int = 0
    s_eps: Optional[float] = None  # filled on snapshots

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim == 1:
            self.positions = self.positions.reshape(-1, 1)
        self.r = np.asarray(self.r, dtype=float).ravel()
        if self.r.shape[0] != self.positions.shape[0]:
            raise DomainError("one mass parameter per particle required")
        if np.any(self.r <= 0):
            raise DomainError("mass parameters must stay positive")

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.r ** 2, self.positions)

    @classmethod
    def from_measure(cls, measure: DiscreteMeasure, step: int = 0) -> "FlowState":
        return cls(measure.points.copy(), np.sqrt(measure.weights), step)


@dataclass
class FlowParams:
    """Learning rates and solver knobs; defaults follow the reference runs.

    ``mass_rate`` selects which rate enters the mirror exponent: the
    as-printed update reuses ``eta_x`` ("printed"), the alternative uses
    ``eta_r``.  Mass updates are forced off for the balanced constraint,
    whose divergence is infinite off the equal-mass manifold.
    """

    eta_x: float = 60.0
    eta_r: float = 0.3
    eps: float = 1e-3
    entropy: Entropy = field(default_factory=lambda: KL(rho=0.1))
    steps: int = 300
    mass_updates: bool = True
    mass_rate: str = "printed"
    solve_tol: float = 1e-7
    solve_max_iter: int = 20000

    def __post_init__(self):
        if self.eta_x < 0 or self.eta_r < 0:
            raise DomainError("learning rates must be nonnegative")
        if self.eps <= 0:
            raise DomainError("eps must be positive")
        if self.mass_rate not in ("printed", "eta_r"):
            raise DomainError("mass_rate must be 'printed' or 'eta_r'")

    @property
    def mass_updates_active(self) -> bool:
        return self.mass_updates and not isinstance(self.entropy, Balanced)


# mirror-step exponents are clipped here; keeps r finite and positive even
# on pathological gradients
_EXP_CLIP = 200.0


def _weight_subgradient(entropy, eps, pot, pi, weights, other_mass, rho):
    """An element of the weight subdifferential of OT_eps.

    Works for any penalty whose conjugate is finite at the potentials
    (smooth families, TV, Range); the quadratic term comes from the plan's
    row sums rather than the conjugate derivative.
    """
    conj = entropy.conj(-pot) if rho is None else entropy.conj(-pot, rho=rho)
    if np.any(np.isinf(conj)):
        raise UnsupportedEntropyError(
            f"subgradient unavailable for {entropy.name} at these potentials")
    return -conj - eps * (pi.sum(axis=1) / weights - other_mass)


class _FlowWorkspace:
    """Per-run cache: target-side solves and warm-start potentials."""

    def __init__(self, target: DiscreteMeasure, cost: CostSpec, params: FlowParams):
        self.target = target
        self.cost = cost
        self.params = params
        self.f_ab = None
        self.g_ab = None
        self.f_aa = None
        self._f_eps_target = None

    @property
    def f_eps_target(self) -> float:
        if self._f_eps_target is None:
            p = self.params
            opts = SolveOptions(tol=p.solve_tol, max_iter=p.solve_max_iter)
            self._f_eps_target = sinkhorn_entropy(
                self.target, self.cost, p.entropy, p.eps, opts).value
        return self._f_eps_target

    def _opts(self, warm):
        return SolveOptions(tol=self.params.solve_tol,
                            max_iter=self.params.solve_max_iter,
                            init=warm if warm is not None else "asymptotic")

    def solves(self, alpha: DiscreteMeasure):
        p = self.params
        c_ab = self.cost.pairwise(alpha.points, self.target.points)
        warm = (self.f_ab, self.g_ab) if self.f_ab is not None else None
        pots, rep = solve(alpha, self.target, c_ab, p.entropy, p.eps,
                          self._opts(warm))
        if pots is None:
            raise DomainError("flow hit an infeasible configuration")
        c_aa = self.cost.pairwise(alpha.points, alpha.points)
        f_aa, rep_s = solve_symmetric(alpha, c_aa, p.entropy, p.eps,
                                      self._opts(self.f_aa))
        self.f_ab, self.g_ab, self.f_aa = pots.f, pots.g, f_aa
        return pots, c_ab, f_aa, c_aa

    def s_eps(self, alpha, pots, c_ab, f_aa, c_aa) -> float:
        p = self.params
        ot_ab = dual_value(pots, alpha, self.target, c_ab)
        ot_aa = dual_value(DualPotentials(f_aa, f_aa, p.eps, p.entropy),
                           alpha, alpha, c_aa)
        ma = alpha.total_mass
        f_eps_alpha = -0.5 * ot_aa + 0.5 * p.eps * ma * ma
        return (ot_ab + f_eps_alpha + self.f_eps_target
                - p.eps * ma * self.target.total_mass)


def _grads(alpha, workspace):
    p = workspace.params
    target, cost = workspace.target, workspace.cost
    pots, c_ab, f_aa, c_aa = workspace.solves(alpha)
    pi_ab = plan_matrix(pots, alpha, target, c_ab)
    pots_aa = DualPotentials(f_aa, f_aa, p.eps, p.entropy)
    pi_aa = plan_matrix(pots_aa, alpha, alpha, c_aa)
    g_pos = (np.einsum("ij,ijk->ik", pi_ab, cost.grad_x(alpha.points, target.points))
             - np.einsum("ij,ijk->ik", pi_aa, cost.grad_x(alpha.points, alpha.points)))
    g_weights = None
    if p.mass_updates_active:
        rho = p.entropy.rho_at(alpha.points) if isinstance(p.entropy, KL) else None
        ma, mb = alpha.total_mass, target.total_mass
        g_weights = (_weight_subgradient(p.entropy, p.eps, pots.f, pi_ab,
                                         alpha.weights, mb, rho)
                     - _weight_subgradient(p.entropy, p.eps, f_aa, pi_aa,
                                           alpha.weights, ma, rho)
                     + p.eps * (ma - mb))
    return g_pos, g_weights, (pots, c_ab, f_aa, c_aa)


def flow_step(state: FlowState, target: DiscreteMeasure, cost: CostSpec,
              params: FlowParams, workspace: Optional[_FlowWorkspace] = None,
              ) -> FlowState:
    """One synchronous update of every particle."""
    if workspace is None:
        workspace = _FlowWorkspace(target, cost, params)
    alpha = state.measure()
    g_pos, g_weights, _ = _grads(alpha, workspace)
    positions = state.positions - params.eta_x * g_pos
    r = state.r
    if g_weights is not None:
        rate = params.eta_x if params.mass_rate == "printed" else params.eta_r
        grad_r = 2.0 * r * g_weights
        r = r * np.exp(np.clip(-2.0 * rate * grad_r, -_EXP_CLIP, _EXP_CLIP))
    return FlowState(positions, r, state.step + 1)


def run_flow(init: FlowState, target: DiscreteMeasure, cost: CostSpec,
             params: FlowParams, snapshot_every: int = 50) -> List[FlowState]:
    """Drive the flow for ``params.steps`` steps, returning snapshots.

    Snapshots (including the initial and final states) carry the current
    divergence value in ``s_eps``.
    """
    if snapshot_every < 1:
        raise DomainError("snapshot_every must be >= 1")
    workspace = _FlowWorkspace(target, cost, params)

    def snapshot(state: FlowState) -> FlowState:
        alpha = state.measure()
        pots, c_ab, f_aa, c_aa = workspace.solves(alpha)
        value = workspace.s_eps(alpha, pots, c_ab, f_aa, c_aa)
        return replace(state, positions=state.positions.copy(),
                       r=state.r.copy(), s_eps=value)

    trajectory = [snapshot(init)]
    state = init
    for k in range(params.steps):
        state = flow_step(state, target, cost, params, workspace)
        if state.step % snapshot_every == 0 or k == params.steps - 1:
            trajectory.append(snapshot(state))
    return trajectory
