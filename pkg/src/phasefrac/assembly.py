"""Global assembly of the momentum and damage-evolution systems.

Bilinear quadrilaterals with 2x2 Gauss quadrature carry both the
displacement and the damage field.  All element quantities are
precomputed once per mesh (``Discretization``) and the assembly loops
are vectorised over elements, with a deterministic scatter into sparse
COO triplets, so repeated assembly of the same state is bitwise
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .material import (
    MaterialParams,
    StrainState,
    coupling_dstress_dd,
    macaulay,
    stress,
    tangent_uu,
)
from .meshing import Mesh

_GP = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]) / np.sqrt(3.0)
_GW = np.ones(4)
_INPLANE = np.array([0, 1, 3])  # Voigt rows used by the 2D operators


def _shape_q4(xi: float, eta: float):
    n = 0.25 * np.array(
        [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]
    )
    dn = 0.25 * np.array(
        [
            [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
            [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
        ]
    )
    return n, dn


@dataclass
class GaussPointState:
    """Per-Gauss-point scalars driving the damage evolution.

    Arrays are shaped ``(n_elems, n_gp)``.  ``psi_plus`` may hold the
    predicted (half-step updated) active energy of the fast schemes;
    ``psi_max`` is the maximum active energy over accepted steps.
    """

    strain: np.ndarray  # (ne, ng, 4) Voigt
    tr_eps: np.ndarray
    tr_eps_plus: np.ndarray
    dev_dot_dev: np.ndarray
    psi_plus: np.ndarray
    psi_max: np.ndarray

    @classmethod
    def zeros(cls, n_elems: int, n_gp: int) -> "GaussPointState":
        z = lambda: np.zeros((n_elems, n_gp))
        return cls(
            strain=np.zeros((n_elems, n_gp, 4)),
            tr_eps=z(),
            tr_eps_plus=z(),
            dev_dot_dev=z(),
            psi_plus=z(),
            psi_max=z(),
        )


@dataclass
class GlobalSystem:
    """Assembled residual and tangent with a trivial node-to-dof map."""

    stiffness: sparse.spmatrix
    residual: np.ndarray
    dofs_per_node: int = 1
    constrained: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))

    @property
    def n(self) -> int:
        return self.residual.shape[0]

    def dof_index(self, node: int, component: int = 0) -> int:
        return self.dofs_per_node * node + component


class Discretization:
    """Precomputed shape-function data and scatter maps for one mesh."""

    def __init__(self, mesh: Mesh):
        if mesh.elements.shape[1] != 4:
            raise ValueError("only 4-node quadrilaterals are supported here")
        self.mesh = mesh
        ne = mesh.n_elems
        ng = len(_GW)
        self.n_gp = ng

        self.shape = np.empty((ng, 4))
        dshape = np.empty((ng, 2, 4))
        for g, (xi, eta) in enumerate(_GP):
            self.shape[g], dshape[g] = _shape_q4(xi, eta)

        coords = mesh.nodes[mesh.elements]  # (ne, 4, 2)
        # jacobian at each gp: J = dN_dxi @ X   -> (ne, ng, 2, 2)
        jac = np.einsum("gax,exy->egay", dshape, coords)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if np.any(det <= 0.0):
            bad = int(np.argwhere(det <= 0.0)[0][0])
            raise ValueError(f"non-positive jacobian in element {bad}")
        inv = np.empty_like(jac)
        inv[..., 0, 0] = jac[..., 1, 1] / det
        inv[..., 0, 1] = -jac[..., 0, 1] / det
        inv[..., 1, 0] = -jac[..., 1, 0] / det
        inv[..., 1, 1] = jac[..., 0, 0] / det
        grad = np.einsum("egxy,gya->egxa", inv, dshape)  # dN/dx (ne, ng, 2, 4)

        self.wdet = det * _GW[None, :]
        self.grad_d = grad  # scalar-field gradient operator
        bu = np.zeros((ne, ng, 3, 8))
        bu[:, :, 0, 0::2] = grad[:, :, 0, :]
        bu[:, :, 1, 1::2] = grad[:, :, 1, :]
        bu[:, :, 2, 0::2] = grad[:, :, 1, :]
        bu[:, :, 2, 1::2] = grad[:, :, 0, :]
        self.b_u = bu

        conn = mesh.elements
        self.u_dofs = np.empty((ne, 8), dtype=np.int64)
        self.u_dofs[:, 0::2] = 2 * conn
        self.u_dofs[:, 1::2] = 2 * conn + 1
        self.d_dofs = conn.astype(np.int64)

        self._rows_uu = np.repeat(self.u_dofs, 8, axis=1).ravel()
        self._cols_uu = np.tile(self.u_dofs, (1, 8)).ravel()
        self._rows_dd = np.repeat(self.d_dofs, 4, axis=1).ravel()
        self._cols_dd = np.tile(self.d_dofs, (1, 4)).ravel()

        self.n_u_dofs = 2 * mesh.n_nodes
        self.n_d_dofs = mesh.n_nodes

    # ------------------------------------------------------------------
    # field evaluation at Gauss points
    # ------------------------------------------------------------------
    def interp_nodal(self, field: np.ndarray) -> np.ndarray:
        """Nodal scalar field interpolated at every Gauss point, (ne, ng)."""
        return field[self.d_dofs] @ self.shape.T

    def strain_state(self, u: np.ndarray) -> StrainState:
        eps3 = np.einsum("egai,ei->ega", self.b_u, u[self.u_dofs], optimize=True)
        eps4 = np.zeros(eps3.shape[:2] + (4,))
        eps4[..., 0] = eps3[..., 0]
        eps4[..., 1] = eps3[..., 1]
        eps4[..., 3] = eps3[..., 2]
        return StrainState.from_voigt(eps4)


def internal_force(
    disc: Discretization, u: np.ndarray, d: np.ndarray, params: MaterialParams
) -> np.ndarray:
    """Assembled internal nodal force from the degraded stress field."""
    st = disc.strain_state(u)
    d_gp = disc.interp_nodal(d)
    sig = stress(st, d_gp, params)[..., _INPLANE]
    fe = np.einsum("egai,ega,eg->ei", disc.b_u, sig, disc.wdet, optimize=True)
    f = np.zeros(disc.n_u_dofs)
    np.add.at(f, disc.u_dofs, fe)
    return f


def assemble_momentum(
    disc: Discretization,
    u: np.ndarray,
    d: np.ndarray,
    params: MaterialParams,
    f_ext: np.ndarray | None = None,
) -> GlobalSystem:
    """Momentum residual (internal minus external force) and stiffness."""
    st = disc.strain_state(u)
    d_gp = disc.interp_nodal(d)

    sig = stress(st, d_gp, params)[..., _INPLANE]
    fe = np.einsum("egai,ega,eg->ei", disc.b_u, sig, disc.wdet, optimize=True)
    r = np.zeros(disc.n_u_dofs)
    np.add.at(r, disc.u_dofs, fe)
    if f_ext is not None:
        r -= f_ext

    c4 = tangent_uu(st, d_gp, params)
    c3 = c4[..., _INPLANE[:, None], _INPLANE[None, :]]
    ke = np.einsum("egai,egab,egbj,eg->eij", disc.b_u, c3, disc.b_u, disc.wdet, optimize=True)
    k = sparse.coo_matrix(
        (ke.ravel(), (disc._rows_uu, disc._cols_uu)), shape=(disc.n_u_dofs, disc.n_u_dofs)
    ).tocsr()
    return GlobalSystem(stiffness=k, residual=r, dofs_per_node=2)


def assemble_evolution(
    disc: Discretization,
    d: np.ndarray,
    d_prev_step: np.ndarray,
    gp: GaussPointState,
    params: MaterialParams,
    scheme_extra: np.ndarray | None = None,
    with_stiffness: bool = True,
) -> GlobalSystem:
    """Damage-evolution residual and tangent at frozen active energy.

    The driving energy is read from ``gp.psi_plus`` (which may hold a
    half-step prediction), never recomputed from the displacement here.
    ``scheme_extra`` is an optional ``(ne, ng)`` scalar field added to
    the N^T N block of the tangent by the fast staggered schemes.
    """
    d_gp = disc.interp_nodal(d)
    dprev_gp = disc.interp_nodal(d_prev_step)
    grad_d = np.einsum("egxa,ea->egx", disc.grad_d, d[disc.d_dofs], optimize=True)

    pen = params.gamma * macaulay(d_gp - dprev_gp, "minus")
    a = -2.0 * (1.0 - d_gp) * gp.psi_plus + params.dissipation_source(d_gp) + pen
    grad_w = 2.0 * params.g_c * params.length_l / params.c_w

    re = np.einsum("ga,eg,eg->ea", disc.shape, a, disc.wdet, optimize=True)
    re += grad_w * np.einsum("egxa,egx,eg->ea", disc.grad_d, grad_d, disc.wdet, optimize=True)
    r = np.zeros(disc.n_d_dofs)
    np.add.at(r, disc.d_dofs, re)

    if not with_stiffness:
        return GlobalSystem(stiffness=None, residual=r, dofs_per_node=1)

    b = (
        2.0 * gp.psi_plus
        + params.dissipation_source_deriv(d_gp)
        + params.gamma * (d_gp < dprev_gp)
    )
    if scheme_extra is not None:
        b = b + scheme_extra
    ke = np.einsum("ga,eg,gb,eg->eab", disc.shape, b, disc.shape, disc.wdet, optimize=True)
    ke += grad_w * np.einsum(
        "egxa,egxb,eg->eab", disc.grad_d, disc.grad_d, disc.wdet, optimize=True
    )
    k = sparse.coo_matrix(
        (ke.ravel(), (disc._rows_dd, disc._cols_dd)), shape=(disc.n_d_dofs, disc.n_d_dofs)
    ).tocsr()
    return GlobalSystem(stiffness=k, residual=r, dofs_per_node=1)


def evolution_driving_state(
    disc: Discretization, u: np.ndarray, params: MaterialParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Strain scalars (tr+ , dev.dev, psi+) recomputed from a displacement."""
    st = disc.strain_state(u)
    tr_plus = macaulay(st.tr_eps, "plus")
    psi_plus = params.mu * st.dev_dot_dev + 0.5 * params.bulk_k * tr_plus**2
    return tr_plus, st.dev_dot_dev, psi_plus


def refresh_gp_from_displacement(
    disc: Discretization, gp: GaussPointState, u: np.ndarray, params: MaterialParams
) -> None:
    """Overwrite the stored strain scalars with the actual kinematic state."""
    st = disc.strain_state(u)
    gp.strain = st.eps
    gp.tr_eps = st.tr_eps
    gp.tr_eps_plus = macaulay(st.tr_eps, "plus")
    gp.dev_dot_dev = st.dev_dot_dev
    gp.psi_plus = params.mu * gp.dev_dot_dev + 0.5 * params.bulk_k * gp.tr_eps_plus**2


def dirichlet_dofs(node_set: np.ndarray, dof_component: int | None, dofs_per_node: int):
    node_set = np.asarray(node_set, dtype=np.int64)
    if dofs_per_node == 1 or dof_component is None:
        return node_set
    return dofs_per_node * node_set + dof_component


def apply_dirichlet(
    system: GlobalSystem,
    node_set: np.ndarray,
    dof_component: int | None = None,
    value: float = 0.0,
) -> GlobalSystem:
    """Constrain dofs by symmetric row/column elimination.

    The prescribed increment is moved to the right-hand side, so solving
    ``K dx = -R`` afterwards returns ``dx = value`` at the constrained
    dofs and the statically condensed solution elsewhere.
    """
    dofs = dirichlet_dofs(node_set, dof_component, system.dofs_per_node)
    if np.any(dofs >= system.n) or np.any(dofs < 0):
        raise IndexError("constrained node outside the system")
    k = system.stiffness.tocsr()
    r = system.residual.copy()

    xv = np.zeros(system.n)
    xv[dofs] = value
    r = r + k @ xv

    mask = np.ones(system.n)
    mask[dofs] = 0.0
    diag = k.diagonal()
    alpha = float(np.mean(np.abs(diag))) or 1.0
    p = sparse.diags(mask)
    k2 = (p @ k @ p + sparse.diags((1.0 - mask) * alpha)).tocsr()
    r2 = r * mask
    r2[dofs] = -alpha * value
    constrained = np.union1d(system.constrained, dofs)
    return GlobalSystem(
        stiffness=k2, residual=r2, dofs_per_node=system.dofs_per_node, constrained=constrained
    )


def reaction_force(
    disc: Discretization,
    u: np.ndarray,
    d: np.ndarray,
    params: MaterialParams,
    node_set: np.ndarray,
    component: int,
) -> float:
    """Resultant of the internal force over a node set (per unit thickness)."""
    f = internal_force(disc, u, d, params)
    dofs = 2 * np.asarray(node_set, dtype=np.int64) + component
    return float(f[dofs].sum())
