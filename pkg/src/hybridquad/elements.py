"""Element-level kernels for plane elasticity on quadrilaterals.

Symmetric tensors are stored as Voigt triples ``(s11, s22, s12)``. The
double contraction carries the factor two on the shear term, and strain
matrices return engineering shear ``2*e12``, so that ``tau : eps(v)`` is the
plain dot product of a stress triple with ``B @ q``.

Element DOFs are ordered ``(u1, v1, u2, v2, u3, v3, u4, v4)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .mesh import DegenerateJacobian, ElementGeometry

__all__ = [
    "PLANE_STRESS",
    "PLANE_STRAIN",
    "Material",
    "SingularH",
    "SingularBubbleBlock",
    "QuadratureRule",
    "gauss_rule",
    "gauss_1d",
    "contract",
    "trace",
    "celast_apply",
    "celast_inv_apply",
    "stress_mode_eval",
    "mode_perturbation",
    "shape_values",
    "shape_ref_gradients",
    "strain_displacement",
    "element_H",
    "element_G",
    "ElementMatrices",
    "element_stiffness_hybrid",
    "element_stiffness_bilinear",
    "recover_stress",
    "bubble_strain",
    "element_stiffness_eas",
    "rigid_modes",
]

PLANE_STRESS = "plane_stress"
PLANE_STRAIN = "plane_strain"

MODES = ("ps", "ecq4")


class SingularH(np.linalg.LinAlgError):
    pass


class SingularBubbleBlock(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Material:
    E: float
    nu: float
    kind: str = PLANE_STRAIN

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (0, 0.5), got {self.nu}")
        if self.E <= 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if self.kind not in (PLANE_STRESS, PLANE_STRAIN):
            raise ValueError(f"unknown material kind {self.kind!r}")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        if self.kind == PLANE_STRAIN:
            return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - self.nu))

    def stiffness_matrix(self) -> np.ndarray:
        """Voigt matrix D with sigma = D @ (e11, e22, 2 e12)."""
        return lame_stiffness(self.mu, self.lam)

    def compliance_matrix(self) -> np.ndarray:
        """Matrix S with s:C^{-1}t = s @ S @ t (contraction factor included)."""
        return lame_compliance(self.mu, self.lam)


def lame_stiffness(mu: float, lam: float) -> np.ndarray:
    return np.array(
        [[2 * mu + lam, lam, 0.0], [lam, 2 * mu + lam, 0.0], [0.0, 0.0, mu]]
    )


def lame_compliance(mu: float, lam: float) -> np.ndarray:
    k = lam / (2.0 * (mu + lam))
    return np.array([[1 - k, -k, 0.0], [-k, 1 - k, 0.0], [0.0, 0.0, 2.0]]) / (2.0 * mu)


# ---------------------------------------------------------------------------
# Tensor helpers
# ---------------------------------------------------------------------------


def contract(s, t) -> float:
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return s[..., 0] * t[..., 0] + s[..., 1] * t[..., 1] + 2.0 * s[..., 2] * t[..., 2]


def trace(s):
    s = np.asarray(s, dtype=float)
    return s[..., 0] + s[..., 1]


def celast_apply(m: Material, e) -> np.ndarray:
    """sigma = 2 mu e + lam tr(e) I, for tensor-shear triples."""
    e = np.asarray(e, dtype=float)
    out = 2.0 * m.mu * e
    tr = e[..., 0] + e[..., 1]
    out[..., 0] += m.lam * tr
    out[..., 1] += m.lam * tr
    return out


def celast_inv_apply(m: Material, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    k = m.lam / (2.0 * (m.mu + m.lam))
    out = s.copy()
    tr = s[..., 0] + s[..., 1]
    out[..., 0] -= k * tr
    out[..., 1] -= k * tr
    return out / (2.0 * m.mu)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 2) reference coordinates
    weights: np.ndarray  # (n,)

    def __iter__(self):
        for (xi, eta), w in zip(self.points, self.weights):
            yield float(xi), float(eta), float(w)

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """Tensor-product n x n Gauss-Legendre rule on [-1, 1]^2."""
    x, w = gauss_1d(n)
    XI, ETA = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    pts = np.column_stack([XI.ravel(), ETA.ravel()])
    wts = W.ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts)


# ---------------------------------------------------------------------------
# Stress modes
# ---------------------------------------------------------------------------


def stress_mode_eval(g: ElementGeometry, mode: str, xi: float, eta: float) -> np.ndarray:
    """3x5 matrix P with stress triple = P @ beta at reference point (xi, eta)."""
    a1, a2, b1, b2 = g.a1, g.a2, g.b1, g.b2
    P = np.array(
        [
            [1.0, 0.0, 0.0, eta, (a2 * a2) / (b2 * b2) * xi],
            [0.0, 1.0, 0.0, (b1 * b1) / (a1 * a1) * eta, xi],
            [0.0, 0.0, 1.0, b1 / a1 * eta, a2 / b2 * xi],
        ]
    )
    if mode == "ecq4":
        P[:, :3] += mode_perturbation(g, xi, eta)
    elif mode != "ps":
        raise ValueError(f"unknown stress mode {mode!r}")
    return P


def mode_perturbation(g: ElementGeometry, xi: float, eta: float) -> np.ndarray:
    """First three columns of the ECQ4 mode minus the PS mode (3x3)."""
    a1, a2, a12 = g.a1, g.a2, g.a12
    b1, b2, b12 = g.b1, g.b2, g.b12
    return np.array(
        [
            [-b12 / b2 * xi, a12 * a2 / b2**2 * xi, (a12 * b2 - a2 * b12) / b2**2 * xi],
            [b1 * b12 / a1**2 * eta, -a12 / a1 * eta, (a1 * b12 - a12 * b1) / a1**2 * eta],
            [b12 / a1 * eta, a12 / b2 * xi, -b12 / b2 * xi - a12 / a1 * eta],
        ]
    )


# ---------------------------------------------------------------------------
# Displacement interpolation
# ---------------------------------------------------------------------------


def shape_values(xi, eta) -> np.ndarray:
    return 0.25 * np.array(
        [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]
    )


def shape_ref_gradients(xi, eta) -> np.ndarray:
    """Rows (dN/dxi, dN/deta), shape (2, 4)."""
    return 0.25 * np.array(
        [
            [-(1 - eta), 1 - eta, 1 + eta, -(1 + eta)],
            [-(1 - xi), -(1 + xi), 1 + xi, 1 - xi],
        ]
    )


def _inverse_jacobian(g: ElementGeometry, xi, eta):
    J = g.jacobian(xi, eta)
    if J <= 0.0:
        raise DegenerateJacobian(f"J_K({xi}, {eta}) = {J} <= 0")
    inv = np.array(
        [[g.b2 + g.b12 * xi, -g.a2 - g.a12 * xi], [-g.b1 - g.b12 * eta, g.a1 + g.a12 * eta]]
    ) / J
    return J, inv


def strain_displacement(g: ElementGeometry, xi: float, eta: float) -> np.ndarray:
    """3x8 matrix B mapping nodal displacements to (e11, e22, 2 e12)."""
    _, inv = _inverse_jacobian(g, xi, eta)
    dN = inv.T @ shape_ref_gradients(xi, eta)  # rows d/dx, d/dy
    B = np.zeros((3, 8))
    B[0, 0::2] = dN[0]
    B[1, 1::2] = dN[1]
    B[2, 0::2] = dN[1]
    B[2, 1::2] = dN[0]
    return B


def rigid_modes(g: ElementGeometry) -> np.ndarray:
    """Three nodal vectors: x-translation, y-translation, linearized rotation."""
    z = np.asarray(g.corners)
    t = np.zeros((3, 8))
    t[0, 0::2] = 1.0
    t[1, 1::2] = 1.0
    t[2, 0::2] = -z[:, 1]
    t[2, 1::2] = z[:, 0]
    return t


# ---------------------------------------------------------------------------
# Hybrid element
# ---------------------------------------------------------------------------


def element_H(g: ElementGeometry, m: Material, mode: str, order: int = 2) -> np.ndarray:
    S = m.compliance_matrix()
    H = np.zeros((5, 5))
    for xi, eta, w in gauss_rule(order):
        P = stress_mode_eval(g, mode, xi, eta)
        H += w * g.jacobian(xi, eta) * (P.T @ S @ P)
    return 0.5 * (H + H.T)


def element_G(g: ElementGeometry, mode: str, order: int = 2) -> np.ndarray:
    G = np.zeros((5, 8))
    for xi, eta, w in gauss_rule(order):
        P = stress_mode_eval(g, mode, xi, eta)
        B = strain_displacement(g, xi, eta)
        G += w * g.jacobian(xi, eta) * (P.T @ B)
    return G


@dataclass(frozen=True)
class ElementMatrices:
    H: np.ndarray
    G: np.ndarray
    K: np.ndarray
    mode: str

    def recover(self, u_e) -> np.ndarray:
        return recover_stress(self, u_e)


def _cho(H: np.ndarray, exc=SingularH):
    try:
        return scipy.linalg.cho_factor(H)
    except np.linalg.LinAlgError as err:
        raise exc(str(err)) from None


def element_stiffness_hybrid(g: ElementGeometry, m: Material, mode: str) -> ElementMatrices:
    """Condensed stiffness K = G^T H^{-1} G of the PS or ECQ4 element."""
    H = element_H(g, m, mode)
    G = element_G(g, mode)
    K = G.T @ scipy.linalg.cho_solve(_cho(H), G)
    return ElementMatrices(H, G, 0.5 * (K + K.T), mode)


def recover_stress(em: ElementMatrices, u_e) -> np.ndarray:
    """Stress parameters beta = H^{-1} G u_e."""
    return scipy.linalg.cho_solve(_cho(em.H), em.G @ np.asarray(u_e, dtype=float))


# ---------------------------------------------------------------------------
# Standard bilinear element
# ---------------------------------------------------------------------------


def element_stiffness_bilinear(g: ElementGeometry, m: Material, order: int = 5) -> np.ndarray:
    D = m.stiffness_matrix()
    K = np.zeros((8, 8))
    for xi, eta, w in gauss_rule(order):
        B = strain_displacement(g, xi, eta)
        K += w * g.jacobian(xi, eta) * (B.T @ D @ B)
    return 0.5 * (K + K.T)


# ---------------------------------------------------------------------------
# Bubble strains and the enhanced-strain twin
# ---------------------------------------------------------------------------


def bubble_strain(g: ElementGeometry, xi: float, eta: float, variant: str = "modified") -> np.ndarray:
    """3x4 matrix mapping bubble parameters (u_xi, u_eta, v_xi, v_eta) to strain.

    The bubble displacement is ``u = u_xi/2 (xi^2-1) + u_eta/2 (eta^2-1)`` and
    likewise for ``v``. ``variant="standard"`` differentiates with the true
    inverse Jacobian, ``"modified"`` freezes the Jacobian matrix at the
    element center while keeping the pointwise J_K in the denominator.
    """
    # reference derivatives: du/dxi = u_xi * xi, du/deta = u_eta * eta
    dref = np.array([[xi, 0.0], [0.0, eta]])  # columns: params (p_xi, p_eta)
    if variant == "standard":
        _, inv = _inverse_jacobian(g, xi, eta)
        T = inv.T  # (d/dx, d/dy) = T @ (d/dxi, d/deta)
    elif variant == "modified":
        J = g.jacobian(xi, eta)
        if J <= 0.0:
            raise DegenerateJacobian(f"J_K({xi}, {eta}) = {J} <= 0")
        T = np.array([[g.b2, -g.b1], [-g.a2, g.a1]]) / J
    else:
        raise ValueError(f"unknown bubble variant {variant!r}")
    d = T @ dref  # rows d/dx, d/dy; columns p_xi, p_eta
    E = np.zeros((3, 4))
    E[0, 0:2] = d[0]
    E[1, 2:4] = d[1]
    E[2, 0:2] = d[1]
    E[2, 2:4] = d[0]
    return E


def _full_stress_basis(xi: float, eta: float) -> np.ndarray:
    """3x9 basis of the unconstrained stress space span{1, xi, eta} per component."""
    P = np.zeros((3, 9))
    for c in range(3):
        P[c, 3 * c: 3 * c + 3] = (1.0, xi, eta)
    return P


def element_stiffness_eas(g: ElementGeometry, m: Material, variant: str = "modified", order: int = 2) -> np.ndarray:
    """Displacement stiffness of the enhanced-strain (bubble multiplier) scheme.

    Condenses the 9 unconstrained stress parameters, then the 4 bubble
    parameters. ``variant="modified"`` reproduces PS, ``"standard"`` ECQ4.
    """
    S = m.compliance_matrix()
    H = np.zeros((9, 9))
    Gq = np.zeros((9, 8))
    Gb = np.zeros((9, 4))
    for xi, eta, w in gauss_rule(order):
        P = _full_stress_basis(xi, eta)
        wJ = w * g.jacobian(xi, eta)
        H += wJ * (P.T @ S @ P)
        Gq += wJ * (P.T @ strain_displacement(g, xi, eta))
        Gb += wJ * (P.T @ bubble_strain(g, xi, eta, variant))
    G = np.hstack([Gq, Gb])
    Kf = G.T @ scipy.linalg.cho_solve(_cho(0.5 * (H + H.T)), G)
    Kqq, Kqb, Kbb = Kf[:8, :8], Kf[:8, 8:], Kf[8:, 8:]
    Kbb = 0.5 * (Kbb + Kbb.T)
    piv_tol = 1e-12 * np.trace(Kbb)
    try:
        lu, piv = scipy.linalg.lu_factor(Kbb, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as err:
        raise SingularBubbleBlock(str(err)) from None
    if np.min(np.abs(np.diag(lu))) <= piv_tol:
        raise SingularBubbleBlock("bubble block is rank deficient")
    K = Kqq - Kqb @ scipy.linalg.lu_solve((lu, piv), Kqb.T)
    return 0.5 * (K + K.T)
