"""Pointwise material kernels for the volumetric-deviatoric damage model.

All tensor quantities use plane-strain Voigt form with four components
``[xx, yy, zz, xy]``.  The strain vector carries the engineering shear
``gamma_xy = 2*eps_xy``; the stress vector carries ``sigma_xy``.  The
out-of-plane component ``eps_zz`` is kept (and is zero in plane strain)
so traces and deviators are exact 3D quantities.

Every kernel is a pure function of its inputs and broadcasts over leading
array dimensions, so the same code serves scalar unit tests and the
vectorised Gauss-point arrays used by the assembly routines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VOIGT_XX, VOIGT_YY, VOIGT_ZZ, VOIGT_XY = 0, 1, 2, 3

# c_w normalisation of the dissipation functional per model variant
_CW = {"AT1": 8.0 / 3.0, "AT2": 2.0}


def penalty_coefficient(g_c: float, length_l: float, tol_ir: float) -> float:
    """Penalty weight that bounds irreversibility violations by tol_ir."""
    return 27.0 * g_c / (64.0 * length_l * tol_ir**2)


@dataclass
class MaterialParams:
    """Elastic and fracture parameters of the degraded VD-split solid.

    ``bulk_k``, ``c_w`` and ``gamma`` are derived in ``__post_init__``
    when not given explicitly.  Units follow the mm / N / MPa system.
    """

    mu: float
    lam: float
    g_c: float
    length_l: float
    eta: float = 1.0e-6
    at_model: str = "AT1"
    tol_ir: float = 0.01
    bulk_k: float = field(default=None)  # type: ignore[assignment]
    c_w: float = field(default=None)  # type: ignore[assignment]
    gamma: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.at_model not in _CW:
            raise ValueError(f"unknown model variant: {self.at_model!r}")
        if self.bulk_k is None:
            self.bulk_k = self.lam + 2.0 * self.mu / 3.0
        if self.c_w is None:
            self.c_w = _CW[self.at_model]
        if self.gamma is None:
            self.gamma = penalty_coefficient(self.g_c, self.length_l, self.tol_ir)
        if not (self.mu > 0.0 and self.bulk_k > 0.0):
            raise ValueError("mu and bulk_k must be positive")
        if self.length_l <= 0.0:
            raise ValueError("length_l must be positive")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")

    @classmethod
    def from_young_poisson(cls, e_mod: float, nu: float, **kw) -> "MaterialParams":
        mu = e_mod / (2.0 * (1.0 + nu))
        lam = e_mod * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        return cls(mu=mu, lam=lam, **kw)

    @property
    def young_modulus(self) -> float:
        return self.mu * (3.0 * self.lam + 2.0 * self.mu) / (self.lam + self.mu)

    @property
    def poisson_ratio(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))

    @property
    def psi_crit(self) -> float:
        """Active-energy threshold below which damage cannot grow."""
        return self.g_c / (self.c_w * self.length_l)

    def dissipation_source(self, d):
        """w'(d) * Gc / (c_w * l): the local dissipation term of the residual."""
        base = self.g_c / (self.c_w * self.length_l)
        if self.at_model == "AT1":
            return base * np.ones_like(np.asarray(d, dtype=float))
        return base * 2.0 * np.asarray(d, dtype=float)

    def dissipation_source_deriv(self, d):
        if self.at_model == "AT1":
            return np.zeros_like(np.asarray(d, dtype=float))
        base = self.g_c / (self.c_w * self.length_l)
        return base * 2.0 * np.ones_like(np.asarray(d, dtype=float))


@dataclass
class StrainState:
    """Voigt strain plus the two scalar invariants the split needs."""

    eps: np.ndarray  # (..., 4) with engineering shear
    tr_eps: np.ndarray
    dev_dot_dev: np.ndarray

    @classmethod
    def from_voigt(cls, eps: np.ndarray) -> "StrainState":
        eps = np.asarray(eps, dtype=float)
        tr = eps[..., VOIGT_XX] + eps[..., VOIGT_YY] + eps[..., VOIGT_ZZ]
        dxx = eps[..., VOIGT_XX] - tr / 3.0
        dyy = eps[..., VOIGT_YY] - tr / 3.0
        dzz = eps[..., VOIGT_ZZ] - tr / 3.0
        # gamma_xy = 2*eps_xy, so 2*eps_xy**2 = gamma**2 / 2
        dev2 = dxx**2 + dyy**2 + dzz**2 + 0.5 * eps[..., VOIGT_XY] ** 2
        return cls(eps=eps, tr_eps=tr, dev_dot_dev=dev2)


def macaulay(x, sign: str = "plus"):
    """One-sided ramp: (x + |x|)/2 for "plus", (x - |x|)/2 for "minus"."""
    x = np.asarray(x, dtype=float)
    if sign == "plus":
        return 0.5 * (x + np.abs(x))
    if sign == "minus":
        return 0.5 * (x - np.abs(x))
    raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")


def degradation(d, params: MaterialParams):
    """Stiffness degradation g(d) = (1-d)^2 + eta and its derivative.

    ``d`` is not clamped: Newton iterates may leave [0, 1] and the
    quadratic form is well defined there.
    """
    d = np.asarray(d, dtype=float)
    g = (1.0 - d) ** 2 + params.eta
    dg = -2.0 * (1.0 - d)
    return g, dg


def split_energies(strain: StrainState, params: MaterialParams):
    """Active and inactive strain-energy densities of the VD split.

    The active part holds the full deviatoric energy plus the tensile
    volumetric energy; the compressive volumetric remainder is inactive.
    """
    tr_plus = macaulay(strain.tr_eps, "plus")
    tr_minus = macaulay(strain.tr_eps, "minus")
    psi_plus = params.mu * strain.dev_dot_dev + 0.5 * params.bulk_k * tr_plus**2
    psi_minus = 0.5 * params.bulk_k * tr_minus**2
    return psi_plus, psi_minus


def _deviator(eps: np.ndarray, tr: np.ndarray) -> np.ndarray:
    dev = np.array(eps, dtype=float, copy=True)
    dev[..., VOIGT_XX] -= tr / 3.0
    dev[..., VOIGT_YY] -= tr / 3.0
    dev[..., VOIGT_ZZ] -= tr / 3.0
    return dev


def stress(strain: StrainState, d, params: MaterialParams) -> np.ndarray:
    """Degraded stress: g(d)[2 mu dev(eps) + k <tr>+ I] + k <tr>- I (Voigt)."""
    g, _ = degradation(d, params)
    tr_plus = macaulay(strain.tr_eps, "plus")
    tr_minus = macaulay(strain.tr_eps, "minus")
    dev = _deviator(strain.eps, strain.tr_eps)
    sig = 2.0 * params.mu * dev
    # Voigt shear slot of dev holds gamma_xy; sigma_xy = mu * g * gamma_xy
    sig[..., VOIGT_XY] = params.mu * strain.eps[..., VOIGT_XY]
    for i in (VOIGT_XX, VOIGT_YY, VOIGT_ZZ):
        sig[..., i] += params.bulk_k * tr_plus
    sig *= g[..., None] if np.ndim(g) else g
    for i in (VOIGT_XX, VOIGT_YY, VOIGT_ZZ):
        sig[..., i] += params.bulk_k * tr_minus
    return sig


# Constant Voigt building blocks for the tangent
_I_SYM = np.diag([1.0, 1.0, 1.0, 0.5])
_J_VOL = np.zeros((4, 4))
_J_VOL[:3, :3] = 1.0


def tangent_uu(strain: StrainState, d, params: MaterialParams) -> np.ndarray:
    """Stress-strain tangent at fixed damage, (..., 4, 4) Voigt matrix.

    The volumetric block follows the sign of tr(eps); at tr(eps) = 0 the
    tensile branch is used, which makes the tangent right-continuous
    (both branches produce the same stress there).
    """
    g, _ = degradation(d, params)
    plus = (np.asarray(strain.tr_eps) >= 0.0).astype(float)
    minus = 1.0 - plus
    c_dev = 2.0 * params.mu * (_I_SYM - _J_VOL / 3.0)
    g = np.asarray(g, dtype=float)
    c = (
        g[..., None, None] * (c_dev + params.bulk_k * plus[..., None, None] * _J_VOL)
        + params.bulk_k * minus[..., None, None] * _J_VOL
    )
    return c


def coupling_dstress_dd(strain: StrainState, d, params: MaterialParams) -> np.ndarray:
    """Derivative of the stress with respect to the damage variable."""
    _, dg = degradation(d, params)
    tr_plus = macaulay(strain.tr_eps, "plus")
    dev = _deviator(strain.eps, strain.tr_eps)
    out = 2.0 * params.mu * dev
    out[..., VOIGT_XY] = params.mu * strain.eps[..., VOIGT_XY]
    for i in (VOIGT_XX, VOIGT_YY, VOIGT_ZZ):
        out[..., i] += params.bulk_k * tr_plus
    dg = np.asarray(dg, dtype=float)
    return dg[..., None] * out
