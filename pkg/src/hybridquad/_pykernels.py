"""Vectorized element kernels (pure NumPy backend).

All functions take element corners as an array of shape (ne, 4, 2) and
work on every element at once. Reference points are 1-D arrays ``xi``,
``eta`` of equal length nq; outputs carry axes (ne, nq, ...).
"""
from __future__ import annotations

import numpy as np

from .elements import gauss_rule, lame_compliance, lame_stiffness
from .mesh import COEFF_MATRIX


def coefficients(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (a, b), each (ne, 4) holding (c0, c1, c2, c12)."""
    c = np.einsum("ij,ejk->eik", COEFF_MATRIX, corners)
    return c[:, :, 0], c[:, :, 1]


def jacobians(a, b, xi, eta) -> np.ndarray:
    J0 = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    J1 = a[:, 1] * b[:, 3] - a[:, 3] * b[:, 1]
    J2 = a[:, 3] * b[:, 2] - a[:, 2] * b[:, 3]
    return J0[:, None] + J1[:, None] * xi[None, :] + J2[:, None] * eta[None, :]


def map_points(a, b, xi, eta) -> np.ndarray:
    """Physical points, shape (ne, nq, 2)."""
    basis = np.stack([np.ones_like(xi), xi, eta, xi * eta])  # (4, nq)
    return np.stack([a @ basis, b @ basis], axis=-1)


def adjugate(a, b, xi, eta) -> np.ndarray:
    """J * DF^{-1}, rows (xi_x, xi_y; eta_x, eta_y) times J, shape (ne, nq, 2, 2)."""
    ne, nq = a.shape[0], xi.shape[0]
    A = np.empty((ne, nq, 2, 2))
    A[..., 0, 0] = b[:, 2, None] + b[:, 3, None] * xi
    A[..., 0, 1] = -a[:, 2, None] - a[:, 3, None] * xi
    A[..., 1, 0] = -b[:, 1, None] - b[:, 3, None] * eta
    A[..., 1, 1] = a[:, 1, None] + a[:, 3, None] * eta
    return A


def ref_gradients(xi, eta) -> np.ndarray:
    """(nq, 2, 4): rows dN/dxi, dN/deta."""
    g = np.empty((xi.shape[0], 2, 4))
    g[:, 0] = 0.25 * np.stack([-(1 - eta), 1 - eta, 1 + eta, -(1 + eta)], axis=-1)
    g[:, 1] = 0.25 * np.stack([-(1 - xi), -(1 + xi), 1 + xi, 1 - xi], axis=-1)
    return g


def shape_values(xi, eta) -> np.ndarray:
    """(nq, 4)."""
    return 0.25 * np.stack(
        [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)],
        axis=-1,
    )


def physical_gradients(a, b, xi, eta):
    """Return (J, dN) with dN of shape (ne, nq, 2, 4): rows dN/dx, dN/dy."""
    J = jacobians(a, b, xi, eta)
    A = adjugate(a, b, xi, eta)
    dN = np.einsum("eqji,qjn->eqin", A, ref_gradients(xi, eta)) / J[..., None, None]
    return J, dN


def strain_matrices(dN: np.ndarray) -> np.ndarray:
    """B of shape (ne, nq, 3, 8) from physical shape gradients."""
    B = np.zeros(dN.shape[:2] + (3, 8))
    B[..., 0, 0::2] = dN[..., 0, :]
    B[..., 1, 1::2] = dN[..., 1, :]
    B[..., 2, 0::2] = dN[..., 1, :]
    B[..., 2, 1::2] = dN[..., 0, :]
    return B


def stress_modes(a, b, mode: str, xi, eta) -> np.ndarray:
    """P of shape (ne, nq, 3, 5)."""
    a1, a2, a12 = a[:, 1, None], a[:, 2, None], a[:, 3, None]
    b1, b2, b12 = b[:, 1, None], b[:, 2, None], b[:, 3, None]
    X = xi[None, :]
    Y = eta[None, :]
    P = np.zeros((a.shape[0], xi.shape[0], 3, 5))
    P[..., 0, 0] = 1.0
    P[..., 1, 1] = 1.0
    P[..., 2, 2] = 1.0
    P[..., 0, 3] = Y
    P[..., 1, 3] = (b1 * b1) / (a1 * a1) * Y
    P[..., 2, 3] = b1 / a1 * Y
    P[..., 0, 4] = (a2 * a2) / (b2 * b2) * X
    P[..., 1, 4] = X
    P[..., 2, 4] = a2 / b2 * X
    if mode == "ecq4":
        P[..., 0, 0] += -b12 / b2 * X
        P[..., 0, 1] += a12 * a2 / b2**2 * X
        P[..., 0, 2] += (a12 * b2 - a2 * b12) / b2**2 * X
        P[..., 1, 0] += b1 * b12 / a1**2 * Y
        P[..., 1, 1] += -a12 / a1 * Y
        P[..., 1, 2] += (a1 * b12 - a12 * b1) / a1**2 * Y
        P[..., 2, 0] += b12 / a1 * Y
        P[..., 2, 1] += a12 / b2 * X
        P[..., 2, 2] += -b12 / b2 * X - a12 / a1 * Y
    elif mode != "ps":
        raise ValueError(f"unknown stress mode {mode!r}")
    return P


def stress_mode_derivatives(a, b, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """dP/dxi and dP/deta, each (ne, 3, 5); P is affine in (xi, eta)."""
    one = np.ones(1)
    zero = np.zeros(1)
    P0 = stress_modes(a, b, mode, zero, zero)[:, 0]
    Px = stress_modes(a, b, mode, one, zero)[:, 0] - P0
    Py = stress_modes(a, b, mode, zero, one)[:, 0] - P0
    return Px, Py


def hybrid_stiffness(corners: np.ndarray, mu: float, lam: float, mode: str):
    """Condensed hybrid stiffness for all elements.

    Returns (K, H, G) with shapes (ne, 8, 8), (ne, 5, 5), (ne, 5, 8).
    """
    rule = gauss_rule(2)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    a, b = coefficients(np.asarray(corners, dtype=float))
    J, dN = physical_gradients(a, b, xi, eta)
    B = strain_matrices(dN)
    P = stress_modes(a, b, mode, xi, eta)
    wJ = rule.weights[None, :] * J
    S = lame_compliance(mu, lam)
    H = np.einsum("eq,eqai,ab,eqbj->eij", wJ, P, S, P)
    G = np.einsum("eq,eqai,eqaj->eij", wJ, P, B)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    L = np.linalg.cholesky(H)
    Y = np.linalg.solve(L, G)
    K = np.einsum("eki,ekj->eij", Y, Y)
    return K, H, G


def bilinear_stiffness(corners: np.ndarray, mu: float, lam: float, order: int = 5) -> np.ndarray:
    rule = gauss_rule(order)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    a, b = coefficients(np.asarray(corners, dtype=float))
    J, dN = physical_gradients(a, b, xi, eta)
    B = strain_matrices(dN)
    D = lame_stiffness(mu, lam)
    K = np.einsum("eq,eqai,ab,eqbj->eij", rule.weights[None, :] * J, B, D, B)
    return 0.5 * (K + np.swapaxes(K, 1, 2))
