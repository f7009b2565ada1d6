"""Error norms, the residual a posteriori estimator and convergence rates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _pykernels as pk
from .elements import Material, celast_apply, contract, gauss_1d, gauss_rule, lame_compliance, lame_stiffness
from .mesh import REF_CORNERS, ElementGeometry, QuadMesh
from .solver import ProblemSpec, Solution

__all__ = [
    "AnalysisError",
    "MeshMismatch",
    "TopologyMissing",
    "NonPositiveError",
    "ExactSolution",
    "ErrorReport",
    "EstimatorBreakdown",
    "stress_at",
    "displacement_gradient_at",
    "div_stress",
    "error_norms",
    "estimator",
    "efficiency_terms",
    "convergence_rates",
    "audit_exact_solution",
    "element_diameters",
    "STRAIN_NORMS",
    "EDGE_WEIGHTS",
]


class AnalysisError(ValueError):
    pass


class MeshMismatch(AnalysisError):
    pass


class TopologyMissing(AnalysisError):
    pass


class NonPositiveError(AnalysisError):
    pass


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Closed-form solution. All callables are vectorized over (x, y) arrays.

    ``u`` -> (..., 2); ``grad_u`` -> (..., 2, 2) with [i, j] = du_i/dx_j;
    ``sigma`` -> (..., 3) Voigt triple; ``f`` -> (..., 2); ``g(x, y, tag)``
    -> (..., 2).
    """

    u: Callable
    grad_u: Callable
    sigma: Callable
    f: Callable
    g: Callable
    material: Material | None = None


# ---------------------------------------------------------------------------
# Field evaluation
# ---------------------------------------------------------------------------


def _coeffs(sol: Solution, elems):
    corners = sol.mesh.corners()
    if elems is not None:
        corners = corners[elems]
    return pk.coefficients(corners)


def stress_at(sol: Solution, xi, eta, elems=None) -> np.ndarray:
    """Discrete stress triples at reference points, shape (ne, nq, 3)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    a, b = _coeffs(sol, elems)
    if sol.beta is not None:
        beta = sol.beta if elems is None else sol.beta[elems]
        P = pk.stress_modes(a, b, sol.element_kind, xi, eta)
        return np.einsum("eqij,ej->eqi", P, beta)
    ue = sol.element_displacements()
    if elems is not None:
        ue = ue[elems]
    _, dN = pk.physical_gradients(a, b, xi, eta)
    B = pk.strain_matrices(dN)
    D = lame_stiffness(sol.material.mu, sol.material.lam)
    return np.einsum("ij,eqjk,ek->eqi", D, B, ue)


def displacement_gradient_at(sol: Solution, xi, eta, elems=None):
    """Return (J, grad) with grad[e, q, i, j] = du_i/dx_j."""
    a, b = _coeffs(sol, elems)
    J, dN = pk.physical_gradients(a, b, xi, eta)
    ue = sol.element_displacements()
    if elems is not None:
        ue = ue[elems]
    grad = np.einsum("eni,eqjn->eqij", ue.reshape(-1, 4, 2), dN)
    return J, grad


def _strain_from_grad(grad: np.ndarray) -> np.ndarray:
    """Tensor-shear strain triple (e11, e22, e12)."""
    return np.stack(
        [grad[..., 0, 0], grad[..., 1, 1], 0.5 * (grad[..., 0, 1] + grad[..., 1, 0])], axis=-1
    )


def _divergence(dsig_dxi, dsig_deta, A, J):
    """Physical divergence from reference derivatives of the stress triple.

    ``A`` is J * DF^{-1} with rows (xi_x, xi_y; eta_x, eta_y) * J.
    """
    dx = (A[..., 0, 0, None] * dsig_dxi + A[..., 1, 0, None] * dsig_deta) / J[..., None]
    dy = (A[..., 0, 1, None] * dsig_dxi + A[..., 1, 1, None] * dsig_deta) / J[..., None]
    return np.stack([dx[..., 0] + dy[..., 2], dx[..., 2] + dy[..., 1]], axis=-1)


def _stress_ref_derivatives(sol: Solution, a, b, xi, eta, ue=None, beta=None):
    """d(sigma)/dxi and d(sigma)/deta at reference points, each (ne, nq, 3)."""
    nq = len(xi)
    if sol.beta is not None:
        Px, Py = pk.stress_mode_derivatives(a, b, sol.element_kind)
        sx = np.einsum("eij,ej->ei", Px, beta)
        sy = np.einsum("eij,ej->ei", Py, beta)
        return np.repeat(sx[:, None], nq, axis=1), np.repeat(sy[:, None], nq, axis=1)
    # bilinear: sigma = D @ Bnum(xi, eta) @ u / J. Bnum is quadratic in each
    # reference variable, so unit-step central differences are exact.
    D = lame_stiffness(sol.material.mu, sol.material.lam)

    def numer(x, y):
        A = pk.adjugate(a, b, x, y)
        dn = np.einsum("eqji,qjn->eqin", A, pk.ref_gradients(x, y))
        return np.einsum("ij,eqjk,ek->eqi", D, pk.strain_matrices(dn), ue)

    S = numer(xi, eta)
    Sx = 0.5 * (numer(xi + 1.0, eta) - numer(xi - 1.0, eta))
    Sy = 0.5 * (numer(xi, eta + 1.0) - numer(xi, eta - 1.0))
    J = pk.jacobians(a, b, xi, eta)
    J1 = (a[:, 1] * b[:, 3] - a[:, 3] * b[:, 1])[:, None, None]
    J2 = (a[:, 3] * b[:, 2] - a[:, 2] * b[:, 3])[:, None, None]
    Jc = J[..., None]
    return (Sx * Jc - S * J1) / Jc**2, (Sy * Jc - S * J2) / Jc**2


def _div_stress_batch(sol: Solution, xi, eta, elems=None):
    a, b = _coeffs(sol, elems)
    ue = sol.element_displacements()
    beta = sol.beta
    if elems is not None:
        ue = ue[elems]
        beta = None if beta is None else beta[elems]
    sx, sy = _stress_ref_derivatives(sol, a, b, xi, eta, ue=ue, beta=beta)
    return _divergence(sx, sy, pk.adjugate(a, b, xi, eta), pk.jacobians(a, b, xi, eta))


def div_stress(g: ElementGeometry, mode: str, beta, xi: float, eta: float) -> np.ndarray:
    """Physical divergence of the hybrid stress P(xi, eta) @ beta on one element."""
    a = np.array([[g.a0, g.a1, g.a2, g.a12]])
    b = np.array([[g.b0, g.b1, g.b2, g.b12]])
    x = np.array([float(xi)])
    y = np.array([float(eta)])
    J = pk.jacobians(a, b, x, y)
    if J[0, 0] <= 0.0:
        from .mesh import DegenerateJacobian

        raise DegenerateJacobian(f"J_K({xi}, {eta}) <= 0")
    Px, Py = pk.stress_mode_derivatives(a, b, mode)
    beta = np.asarray(beta, dtype=float)
    sx = (Px[0] @ beta)[None, None]
    sy = (Py[0] @ beta)[None, None]
    return _divergence(sx, sy, pk.adjugate(a, b, x, y), J)[0, 0]


def element_diameters(mesh: QuadMesh) -> np.ndarray:
    z = mesh.corners()
    d = np.linalg.norm(z[:, :, None, :] - z[:, None, :, :], axis=-1)
    return d.max(axis=(1, 2))


# ---------------------------------------------------------------------------
# Error norms
# ---------------------------------------------------------------------------


@dataclass
class ErrorReport:
    stress_err: float
    stress_norm: float
    disp_err: float
    disp_norm: float
    pressure_err: float
    pressure_norm: float
    eta: float | None = None

    @property
    def e_stress_rel(self) -> float:
        return self.stress_err / self.stress_norm

    @property
    def e_disp_rel(self) -> float:
        return self.disp_err / self.disp_norm

    @property
    def e_pressure_rel(self) -> float:
        return self.pressure_err / self.pressure_norm if self.pressure_norm > 0 else self.pressure_err

    @property
    def energy_norm(self) -> float:
        return math.hypot(self.stress_norm, self.disp_norm)

    @property
    def e_total_rel(self) -> float:
        return math.hypot(self.stress_err, self.disp_err) / self.energy_norm

    @property
    def eta_rel(self) -> float | None:
        return None if self.eta is None else self.eta / self.energy_norm

    @property
    def ratio(self) -> float | None:
        return None if self.eta is None else self.eta_rel / self.e_total_rel

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("e_stress_rel", "e_disp_rel", "e_pressure_rel", "e_total_rel", "eta_rel", "ratio"):
            out[k] = getattr(self, k)
        return out


def error_norms(sol: Solution, exact: ExactSolution, mesh: QuadMesh | None = None, order: int = 5) -> ErrorReport:
    if mesh is not None and mesh is not sol.mesh:
        raise MeshMismatch("solution and error mesh differ")
    if sol.u.shape != (2 * sol.mesh.n_nodes,):
        raise MeshMismatch("displacement vector does not match the mesh")
    rule = gauss_rule(order)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    a, b = _coeffs(sol, None)
    X = pk.map_points(a, b, xi, eta)
    J, grad_h = displacement_gradient_at(sol, xi, eta)
    wJ = rule.weights[None, :] * J
    sig_h = stress_at(sol, xi, eta)
    sig = np.asarray(exact.sigma(X[..., 0], X[..., 1]), dtype=float)
    grad = np.asarray(exact.grad_u(X[..., 0], X[..., 1]), dtype=float)
    ds = sig - sig_h
    dg = grad - grad_h
    p = -0.5 * (sig[..., 0] + sig[..., 1])
    p_h = -0.5 * (sig_h[..., 0] + sig_h[..., 1])
    return ErrorReport(
        stress_err=math.sqrt(max(np.sum(wJ * contract(ds, ds)), 0.0)),
        stress_norm=math.sqrt(np.sum(wJ * contract(sig, sig))),
        disp_err=math.sqrt(np.sum(wJ * np.sum(dg**2, axis=(-1, -2)))),
        disp_norm=math.sqrt(np.sum(wJ * np.sum(grad**2, axis=(-1, -2)))),
        pressure_err=math.sqrt(np.sum(wJ * (p - p_h) ** 2)),
        pressure_norm=math.sqrt(np.sum(wJ * p**2)),
    )


# ---------------------------------------------------------------------------
# A posteriori estimator
# ---------------------------------------------------------------------------


@dataclass
class EstimatorBreakdown:
    volume: float  # sum_K || h_K (f + div sigma_h) ||^2
    constitutive: float  # || C^{-1} sigma_h - eps(u_h) ||^2
    jump: float  # sum_E h_E || [sigma_h n_E] ||^2
    per_element: np.ndarray = field(repr=False)  # (ne, 3) local volume, constitutive, half-jump
    per_edge: np.ndarray = field(repr=False)  # (n_edges,) h_E * ||[sigma_h n]||^2

    @property
    def eta_squared(self) -> float:
        return self.volume + self.constitutive + self.jump

    @property
    def eta(self) -> float:
        return math.sqrt(self.eta_squared)

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "constitutive": self.constitutive,
            "jump": self.jump,
            "eta": self.eta,
        }


STRAIN_NORMS = ("engineering", "tensor")
EDGE_WEIGHTS = ("length", "unit")


def _volume_terms(sol: Solution, f: Callable, order: int, strain_norm: str = "engineering"):
    rule = gauss_rule(order)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    a, b = _coeffs(sol, None)
    X = pk.map_points(a, b, xi, eta)
    J = pk.jacobians(a, b, xi, eta)
    wJ = rule.weights[None, :] * J
    r = np.asarray(f(X[..., 0], X[..., 1]), dtype=float) + _div_stress_batch(sol, xi, eta)
    h = element_diameters(sol.mesh)
    vol = h**2 * np.sum(wJ * np.sum(r**2, axis=-1), axis=1)

    _, grad_h = displacement_gradient_at(sol, xi, eta)
    sig_h = stress_at(sol, xi, eta)
    S = lame_compliance(sol.material.mu, sol.material.lam)
    # S @ sigma gives (e11, e22, 2 e12); halve shear to get the tensor triple
    c_inv = np.einsum("ij,eqj->eqi", S, sig_h) * np.array([1.0, 1.0, 0.5])
    d = c_inv - _strain_from_grad(grad_h)
    if strain_norm == "engineering":
        # Voigt doubling applied to the engineering shear 2 e12
        d[..., 2] *= 2.0
    elif strain_norm != "tensor":
        raise ValueError(f"unknown strain norm {strain_norm!r}")
    cons = np.sum(wJ * contract(d, d), axis=1)
    return vol, cons


def _edge_ref_points(local: int, t: np.ndarray):
    p = REF_CORNERS[local]
    q = REF_CORNERS[(local + 1) % 4]
    return p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])


def _jump_terms(sol: Solution, g: Callable | None, order: int = 4, edge_weight: str = "length"):
    mesh = sol.mesh
    if not mesh.edges:
        raise TopologyMissing("mesh has no edge topology")
    s, w = gauss_1d(order)
    t = 0.5 * (s + 1.0)
    edges = [e for e in mesh.edges if e.is_interior or e.label.kind == "neumann"]
    idx = {id(e): i for i, e in enumerate(mesh.edges)}
    n_e = len(edges)
    sig_l = np.empty((n_e, len(t), 3))
    sig_r = np.zeros((n_e, len(t), 3))
    for local in range(4):
        sel = [i for i, e in enumerate(edges) if e.left_local == local]
        if sel:
            xi, eta = _edge_ref_points(local, t)
            sig_l[sel] = stress_at(sol, xi, eta, elems=np.array([edges[i].left for i in sel]))
        sel = [i for i, e in enumerate(edges) if e.is_interior and e.right_local == local]
        if sel:
            xi, eta = _edge_ref_points(local, 1.0 - t)
            sig_r[sel] = stress_at(sol, xi, eta, elems=np.array([edges[i].right for i in sel]))
    per_edge = np.zeros(len(mesh.edges))
    for i, e in enumerate(edges):
        pa, pb = mesh.nodes[e.nodes[0]], mesh.nodes[e.nodes[1]]
        tang = (pb - pa) / e.length
        n = np.array([tang[1], -tang[0]])
        ds = sig_l[i] - sig_r[i]
        jump = np.stack([ds[:, 0] * n[0] + ds[:, 2] * n[1], ds[:, 2] * n[0] + ds[:, 1] * n[1]], axis=-1)
        if not e.is_interior:
            pts = pa[None, :] * (1 - t)[:, None] + pb[None, :] * t[:, None]
            if g is not None:
                jump = jump - np.asarray(g(pts[:, 0], pts[:, 1], e.label.tag), dtype=float)
        integral = 0.5 * e.length * np.sum(w * np.sum(jump**2, axis=-1))
        per_edge[idx[id(e)]] = (e.length if edge_weight == "length" else 1.0) * integral
    return per_edge


def estimator(
    sol: Solution,
    spec: ProblemSpec | None = None,
    f: Callable | None = None,
    g: Callable | None = None,
    order: int = 4,
    strain_norm: str = "engineering",
    edge_weight: str = "length",
) -> EstimatorBreakdown:
    """Residual estimator: volume residual, constitutive residual, edge jumps.

    ``f`` and ``g`` default to the body force and traction of ``spec``.
    ``strain_norm`` selects how the constitutive residual is measured:
    ``"engineering"`` squares (e11, e22, 2 e12) with the doubled-shear
    contraction, i.e. e11^2 + e22^2 + 8 e12^2 (the default, used by the
    benchmark tables); ``"tensor"`` is the plain Frobenius
    norm e11^2 + e22^2 + 2 e12^2. ``edge_weight="unit"`` drops the h_E
    factor on the jump term (diagnostic only).
    """
    if edge_weight not in EDGE_WEIGHTS:
        raise ValueError(f"unknown edge weight {edge_weight!r}")
    if f is None:
        f = spec.body_force if spec is not None else (lambda x, y: np.zeros(np.shape(x) + (2,)))
    if g is None and spec is not None:
        g = spec.traction
    vol, cons = _volume_terms(sol, f, order, strain_norm)
    per_edge = _jump_terms(sol, g, edge_weight=edge_weight)
    local_jump = np.zeros(sol.mesh.n_elements)
    for i, e in enumerate(sol.mesh.edges):
        if e.is_interior:
            local_jump[e.left] += 0.5 * per_edge[i]
            local_jump[e.right] += 0.5 * per_edge[i]
        else:
            local_jump[e.left] += per_edge[i]
    per_element = np.column_stack([vol, cons, local_jump])
    return EstimatorBreakdown(
        volume=float(np.sum(vol)),
        constitutive=float(np.sum(cons)),
        jump=float(np.sum(per_edge)),
        per_element=per_element,
        per_edge=per_edge,
    )


def efficiency_terms(sol: Solution, spec: ProblemSpec | None = None, f: Callable | None = None, order: int = 4) -> dict:
    """Left side of the efficiency bound and the data oscillation osc(f)^2."""
    est = estimator(sol, spec, f, None if spec is None else spec.traction, order)
    if f is None:
        f = spec.body_force
    rule = gauss_rule(order)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    a, b = _coeffs(sol, None)
    X = pk.map_points(a, b, xi, eta)
    wJ = rule.weights[None, :] * pk.jacobians(a, b, xi, eta)
    fv = np.asarray(f(X[..., 0], X[..., 1]), dtype=float)
    area = wJ.sum(axis=1)
    fh = np.einsum("eq,eqc->ec", wJ, fv) / area[:, None]
    h = element_diameters(sol.mesh)
    osc_k = h**2 * np.sum(wJ * np.sum((fv - fh[:, None]) ** 2, axis=-1), axis=1)
    return {"lhs": est.volume + est.jump, "osc2": float(np.sum(osc_k)), "osc2_per_element": osc_k, "estimator": est}


# ---------------------------------------------------------------------------
# Rates and audits
# ---------------------------------------------------------------------------


def convergence_rates(errors: Sequence[float]) -> list[float]:
    """log2(e_L / e_{L+1}) for successive halvings of h."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise AnalysisError("need at least two levels")
    if min(errors) <= 0.0:
        raise NonPositiveError("errors must be positive")
    return [math.log2(e0 / e1) for e0, e1 in zip(errors, errors[1:])]


def audit_exact_solution(exact: ExactSolution, material: Material, points: np.ndarray, h: float = 1e-4) -> dict:
    """Finite-difference check of sigma = C eps(u) and -div sigma = f.

    Returns the maximum relative discrepancies.
    """
    x, y = points[:, 0], points[:, 1]

    def fd(fun, comp_axis):
        dx = (np.asarray(fun(x + h, y)) - np.asarray(fun(x - h, y))) / (2 * h)
        dy = (np.asarray(fun(x, y + h)) - np.asarray(fun(x, y - h))) / (2 * h)
        return dx, dy

    ux, uy = fd(exact.u, None)
    grad_fd = np.stack([ux, uy], axis=-1)  # [n, i, j] = du_i/dx_j
    grad = np.asarray(exact.grad_u(x, y))
    eps = _strain_from_grad(grad)
    sig = np.asarray(exact.sigma(x, y))
    sig_c = celast_apply(material, eps)
    sx, sy = fd(exact.sigma, None)
    div = np.stack([sx[:, 0] + sy[:, 2], sx[:, 2] + sy[:, 1]], axis=-1)
    f = np.asarray(exact.f(x, y))
    scale_g = max(np.abs(grad).max(), 1e-300)
    scale_s = max(np.abs(sig).max(), 1e-300)
    scale_f = max(np.abs(div).max(), np.abs(f).max(), 1.0)
    return {
        "grad": float(np.abs(grad_fd - grad).max() / scale_g),
        "constitutive": float(np.abs(sig_c - sig).max() / scale_s),
        "equilibrium": float(np.abs(div + f).max() / scale_f),
    }
