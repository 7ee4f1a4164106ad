"""Staggered drivers: the standard scheme and the fast fixed-stress variants.

The standard scheme (ST) alternates a damage solve at frozen active
energy with a momentum solve at frozen damage.  The fast schemes keep a
stress invariant fixed while the damage evolves: S1 fixes the first
(volumetric) invariant, S2 the second (deviatoric) one, S3 both.  Each
adds a negative rank-preserving term to the damage tangent at the first
Newton iteration and then predicts the active-energy change produced by
the damage increment, so the evolution equation already sees the strain
response the next momentum solve would deliver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .assembly import (
    Discretization,
    GaussPointState,
    apply_dirichlet,
    assemble_evolution,
    assemble_momentum,
    refresh_gp_from_displacement,
)
from .linsolve import check_spd, factor_solve
from .material import MaterialParams, degradation


class SchemeKind(str, Enum):
    ST = "ST"
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"


@dataclass
class SolverConfig:
    tol_nr: float = 1.0e-7
    tol_st: float = 1.0e-6
    max_nr: int = 50
    max_stag: int = 2000
    d_cap: float = 0.95
    res_floor: float = 1.0e-12
    lin_method: str = "direct"

    def __post_init__(self):
        if not self.tol_st > self.tol_nr:
            raise ValueError("tol_st must exceed tol_nr")
        if not 0.0 < self.d_cap < 1.0:
            raise ValueError("d_cap must lie in (0, 1)")


@dataclass
class StaggeredStats:
    n_stag: int = 0
    n_nr_u: int = 0
    n_nr_d: int = 0
    residual_history: list = field(default_factory=list)
    reaction: float = 0.0
    final_rd_ratio: float = 0.0
    final_ru_ratio: float = 0.0
    spd_fallbacks: int = 0
    wall_u: float = 0.0
    wall_d: float = 0.0


@dataclass
class SolverState:
    """Primary fields plus the Gauss-point history of one simulation."""

    u: np.ndarray
    d: np.ndarray
    d_prev: np.ndarray
    gp: GaussPointState

    @classmethod
    def zeros(cls, disc: Discretization) -> "SolverState":
        return cls(
            u=np.zeros(disc.n_u_dofs),
            d=np.zeros(disc.n_d_dofs),
            d_prev=np.zeros(disc.n_d_dofs),
            gp=GaussPointState.zeros(disc.mesh.n_elems, disc.n_gp),
        )


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history or []


def softening_gate(
    gp: GaussPointState, d_gp: np.ndarray, params: MaterialParams, d_cap: float = 0.95
) -> np.ndarray:
    """True where the fast-scheme augmentation and energy update apply.

    Requires the active energy to exceed both the dissipation threshold
    and its own historical maximum (the point is softening, not elastic
    or unloading), and the damage to sit below the fully-broken cap.
    """
    return (
        (gp.psi_plus > params.psi_crit)
        & (gp.psi_plus > gp.psi_max)
        & (d_gp < d_cap)
    )


def extra_stiffness(
    scheme: SchemeKind,
    gp: GaussPointState,
    d_gp: np.ndarray,
    params: MaterialParams,
    d_cap: float = 0.95,
) -> np.ndarray:
    """Scalar multiplier on N^T N added to the damage tangent, per gp.

    Zero for the standard scheme and wherever the softening gate is
    closed.  Otherwise ``-4 (1-d)^2 / g(d) * X`` with X the volumetric
    (S1), deviatoric (S2) or combined (S3) active-energy density pair.
    """
    out = np.zeros_like(gp.psi_plus)
    if scheme == SchemeKind.ST:
        return out
    gate = softening_gate(gp, d_gp, params, d_cap)
    if not np.any(gate):
        return out
    g, _ = degradation(d_gp, params)
    base = -4.0 * (1.0 - d_gp) ** 2 / g
    vol = params.bulk_k * gp.tr_eps_plus**2
    dev = 2.0 * params.mu * gp.dev_dot_dev
    if scheme == SchemeKind.S1:
        x = vol
    elif scheme == SchemeKind.S2:
        x = dev
    else:
        x = vol + dev
    out[gate] = (base * x)[gate]
    return out


def update_active_energy(
    scheme: SchemeKind,
    gp: GaussPointState,
    delta_d: np.ndarray,
    d_gp: np.ndarray,
    params: MaterialParams,
    mask: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-step strain-scalar prediction for a damage increment.

    Returns updated ``(tr_eps_plus, dev_dot_dev, psi_plus)`` arrays.
    Points outside ``mask`` or with a non-positive increment keep their
    values: damage growth only ever increases the active energy here.
    """
    tr_plus = gp.tr_eps_plus.copy()
    dev2 = gp.dev_dot_dev.copy()
    psi = gp.psi_plus.copy()
    if scheme == SchemeKind.ST:
        return tr_plus, dev2, psi
    m = mask & (delta_d > 0.0)
    if not np.any(m):
        return tr_plus, dev2, psi
    g, _ = degradation(d_gp, params)
    ratio = (1.0 - d_gp) / g
    y = 2.0 * ratio * delta_d
    if scheme in (SchemeKind.S1, SchemeKind.S3):
        tr_plus[m] = (gp.tr_eps_plus * (1.0 + y))[m]
    if scheme in (SchemeKind.S2, SchemeKind.S3):
        dev_factor = 1.0 + 4.0 * (ratio * delta_d + ratio**2 * delta_d**2)
        dev2[m] = (gp.dev_dot_dev * dev_factor)[m]
    psi[m] = (params.mu * dev2 + 0.5 * params.bulk_k * tr_plus**2)[m]
    return tr_plus, dev2, psi


@dataclass
class _StepContext:
    """Per-time-step residual references shared by the inner solvers."""

    r0_u: float | None = None
    r0_d: float | None = None
    last_u_ratio: float = 0.0


def _free_norm(residual: np.ndarray, free: np.ndarray) -> float:
    return float(np.linalg.norm(residual[free]))


def solve_momentum(
    disc: Discretization,
    state: SolverState,
    constraints: list,
    params: MaterialParams,
    config: SolverConfig,
    ctx: _StepContext,
) -> int:
    """Newton solve of the momentum balance at fixed damage.

    ``constraints`` is a list of ``(dof_array, increment)`` pairs; the
    increments are applied kinematically before equilibration.  On exit
    the Gauss-point strain scalars and active energy are recomputed from
    the converged displacement, replacing any half-step prediction.
    """
    for dofs, inc in constraints:
        if inc != 0.0:
            state.u[dofs] += inc
    all_cons = (
        np.unique(np.concatenate([d for d, _ in constraints]))
        if constraints
        else np.array([], dtype=np.int64)
    )
    free = np.ones(disc.n_u_dofs, dtype=bool)
    free[all_cons] = False

    n_nr = 0
    rnorm = 0.0
    for it in range(config.max_nr + 1):
        system = assemble_momentum(disc, state.u, state.d, params)
        rnorm = _free_norm(system.residual, free)
        if ctx.r0_u is None:
            ctx.r0_u = rnorm
        if rnorm <= max(config.tol_nr * ctx.r0_u, config.res_floor):
            break
        if it == config.max_nr:
            raise ConvergenceError(
                f"momentum Newton loop did not converge in {config.max_nr} iterations "
                f"(relative residual {rnorm / max(ctx.r0_u, config.res_floor):.3e})"
            )
        bounded = apply_dirichlet(system, all_cons, dof_component=None, value=0.0)
        du = factor_solve(bounded.stiffness, -bounded.residual, method=config.lin_method)
        state.u += du
        n_nr += 1

    refresh_gp_from_displacement(disc, state.gp, state.u, params)
    ctx.last_u_ratio = rnorm / max(ctx.r0_u, config.res_floor)
    return n_nr


def solve_evolution(
    disc: Discretization,
    state: SolverState,
    scheme: SchemeKind,
    params: MaterialParams,
    config: SolverConfig,
    ctx: _StepContext,
    pinned_nodes: np.ndarray | None = None,
    stats: StaggeredStats | None = None,
) -> int:
    """Newton solve of the damage evolution at frozen active energy.

    The first iteration of a fast scheme augments the tangent with the
    gated extra stiffness and, from the resulting increment, performs
    the one-time half-step energy update; later iterations run on the
    plain tangent with the frozen predicted energy.
    """
    pins = (
        np.asarray(pinned_nodes, dtype=np.int64)
        if pinned_nodes is not None
        else np.array([], dtype=np.int64)
    )
    free = np.ones(disc.n_d_dofs, dtype=bool)
    free[pins] = False

    n_nr = 0
    for it in range(config.max_nr + 1):
        extra = None
        gate = None
        d_gp = None
        if it == 0 and scheme != SchemeKind.ST:
            d_gp = disc.interp_nodal(state.d)
            gate = softening_gate(state.gp, d_gp, params, config.d_cap)
            if np.any(gate):
                extra = extra_stiffness(scheme, state.gp, d_gp, params, config.d_cap)
            else:
                gate = None
        system = assemble_evolution(
            disc, state.d, state.d_prev, state.gp, params, scheme_extra=extra
        )
        rnorm = _free_norm(system.residual, free)
        if ctx.r0_d is None:
            ctx.r0_d = rnorm
        if rnorm <= max(config.tol_nr * ctx.r0_d, config.res_floor):
            break
        if it == config.max_nr:
            raise ConvergenceError(
                f"evolution Newton loop did not converge in {config.max_nr} iterations "
                f"(relative residual {rnorm / max(ctx.r0_d, config.res_floor):.3e})"
            )
        bounded = apply_dirichlet(system, pins, dof_component=None, value=0.0)
        if extra is not None and check_spd(bounded.stiffness) <= 0.0:
            # the negative augmentation broke definiteness: retreat to the
            # plain tangent for this staggered iteration
            system = assemble_evolution(
                disc, state.d, state.d_prev, state.gp, params, scheme_extra=None
            )
            bounded = apply_dirichlet(system, pins, dof_component=None, value=0.0)
            if stats is not None:
                stats.spd_fallbacks += 1
        dd = factor_solve(bounded.stiffness, -bounded.residual, method=config.lin_method)
        if it == 0 and gate is not None:
            delta_d_gp = disc.interp_nodal(dd)
            tr_plus, dev2, psi = update_active_energy(
                scheme, state.gp, delta_d_gp, d_gp, params, gate
            )
            state.gp.tr_eps_plus = tr_plus
            state.gp.dev_dot_dev = dev2
            state.gp.psi_plus = psi
        state.d += dd
        n_nr += 1
    return n_nr


def evolution_residual_norm(
    disc: Discretization,
    state: SolverState,
    params: MaterialParams,
    pinned_nodes: np.ndarray | None = None,
) -> float:
    """Norm of the evolution residual at the latest (u, d) pair."""
    system = assemble_evolution(
        disc, state.d, state.d_prev, state.gp, params, with_stiffness=False
    )
    free = np.ones(disc.n_d_dofs, dtype=bool)
    if pinned_nodes is not None:
        free[np.asarray(pinned_nodes, dtype=np.int64)] = False
    return _free_norm(system.residual, free)


def staggered_step(
    disc: Discretization,
    state: SolverState,
    scheme: SchemeKind,
    bc_increments: list,
    params: MaterialParams,
    config: SolverConfig,
    pinned_d_nodes: np.ndarray | None = None,
) -> StaggeredStats:
    """Advance one loading step with the chosen staggered scheme.

    ``bc_increments`` lists ``(dof_array, increment)`` pairs for every
    Dirichlet set (zero increments for fixed sets).  The first pass
    applies the boundary increment and solves the momentum balance only
    (a damage solve before any energy change is a no-op); each following
    pass counts as one staggered iteration: damage solve, momentum
    solve, then the evolution-residual check at the updated pair.
    On acceptance the energy history and the previous-step damage are
    committed.
    """
    ctx = _StepContext()
    stats = StaggeredStats()

    t0 = time.perf_counter()
    stats.n_nr_u += solve_momentum(disc, state, bc_increments, params, config, ctx)
    stats.wall_u += time.perf_counter() - t0

    snorm = evolution_residual_norm(disc, state, params, pinned_d_nodes)
    ctx.r0_d = snorm
    stats.residual_history.append(1.0)
    converged = snorm <= config.res_floor
    zero_inc = [(dofs, 0.0) for dofs, _ in bc_increments]

    while not converged:
        if stats.n_stag >= config.max_stag:
            raise ConvergenceError(
                f"staggered loop did not converge in {config.max_stag} iterations",
                residual_history=stats.residual_history,
            )
        stats.n_stag += 1

        t0 = time.perf_counter()
        stats.n_nr_d += solve_evolution(
            disc, state, scheme, params, config, ctx, pinned_d_nodes, stats
        )
        stats.wall_d += time.perf_counter() - t0

        t0 = time.perf_counter()
        stats.n_nr_u += solve_momentum(disc, state, zero_inc, params, config, ctx)
        stats.wall_u += time.perf_counter() - t0

        snorm = evolution_residual_norm(disc, state, params, pinned_d_nodes)
        ratio = snorm / max(ctx.r0_d, config.res_floor)
        stats.residual_history.append(ratio)
        converged = snorm <= max(config.tol_st * ctx.r0_d, config.res_floor)

    stats.final_rd_ratio = stats.residual_history[-1] if stats.n_stag else 0.0
    stats.final_ru_ratio = ctx.last_u_ratio
    np.maximum(state.gp.psi_max, state.gp.psi_plus, out=state.gp.psi_max)
    state.d_prev = state.d.copy()
    return stats
