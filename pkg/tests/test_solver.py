import json

import numpy as np
import pytest
import scipy.sparse as sp

from hybridquad import bench
from hybridquad.analysis import error_norms
from hybridquad.elements import Material, element_G, element_H, gauss_1d, gauss_rule, shape_values
from hybridquad.mesh import DIRICHLET, beam_boundary, generate_regular, map_ref_to_phys, neumann
from hybridquad.solver import (
    NoDirichlet,
    ProblemSpec,
    apply_dirichlet,
    assemble,
    element_dofs,
    solve_problem,
    solve_spd,
    solution_to_json,
)

STEEL = Material(1500.0, 0.3)


def case_spec(example, kind, family="regular", level=1, nu=0.3):
    return bench.problem_spec(bench.BenchmarkCase(example, kind, family, level, nu))


class TestSolveSPD:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        x, stats = solve_spd(sp.identity(3), b)
        assert np.array_equal(x, b)
        assert stats["residual"] == 0.0

    def test_diagonal(self):
        x, _ = solve_spd(sp.diags([2.0, 3.0]), np.array([2.0, 3.0]))
        np.testing.assert_allclose(x, [1.0, 1.0])

    def test_empty(self):
        x, stats = solve_spd(sp.csr_matrix((0, 0)), np.zeros(0))
        assert x.shape == (0,)
        assert stats["residual"] == 0.0


class TestLoads:
    def test_zero_loads(self):
        spec = ProblemSpec(generate_regular(2, 1, boundary_spec=beam_boundary()), STEEL, "ps")
        _, load = assemble(spec)
        assert not load.any()

    def test_constant_traction_partition(self):
        mesh = generate_regular(1, 1, (0, 3), (0, 1), boundary_spec=lambda x, y: neumann("right") if x == 3 else DIRICHLET)
        spec = ProblemSpec(mesh, STEEL, "ps", traction=lambda x, y, tag: np.stack([np.ones_like(x), 0 * x], -1))
        _, load = assemble(spec)
        # nodes 1 and 3 sit on x = 3, the edge has length 1
        np.testing.assert_allclose(load.reshape(-1, 2)[[1, 3]], [[0.5, 0], [0.5, 0]])
        assert not load.reshape(-1, 2)[[0, 2]].any()

    def test_body_load_quadrature_converged(self):
        spec, _ = case_spec(3, "ps", level=1)
        _, load4 = assemble(spec)

        rule = gauss_rule(6)
        mesh = spec.mesh
        ref = np.zeros_like(load4)
        dofs = element_dofs(mesh)
        for k in range(mesh.n_elements):
            g = mesh.geometry(k)
            fe = np.zeros(8)
            for xi, eta, w in rule:
                x, y = map_ref_to_phys(g, xi, eta)
                f = spec.body_force(np.array(x), np.array(y))
                N = shape_values(xi, eta)
                fe[0::2] += w * g.jacobian(xi, eta) * N * f[0]
                fe[1::2] += w * g.jacobian(xi, eta) * N * f[1]
            ref[dofs[k]] += fe
        _, trac_only = assemble(ProblemSpec(mesh, spec.material, "ps", traction=spec.traction))
        body4 = load4 - trac_only
        assert np.abs(body4 - ref).max() <= 1e-12 * np.abs(ref).max()


class TestDirichlet:
    def test_no_dirichlet(self):
        spec = ProblemSpec(generate_regular(2, 1), STEEL, "ps")
        K, load = assemble(spec)
        with pytest.raises(NoDirichlet):
            apply_dirichlet(K, load, spec)

    def test_all_dirichlet(self):
        mesh = generate_regular(1, 1, boundary_spec=lambda x, y: DIRICHLET)
        u0 = lambda x, y: np.stack([x + 1, 2 * y], -1)  # noqa: E731
        sol = solve_problem(ProblemSpec(mesh, STEEL, "ps", dirichlet_value=u0))
        np.testing.assert_array_equal(sol.nodal(), u0(mesh.nodes[:, 0], mesh.nodes[:, 1]))
        assert sol.stats["nfree"] == 0

    def test_homogeneous_keeps_free_loads(self):
        spec, _ = case_spec(3, "ps", level=1)
        spec0 = ProblemSpec(spec.mesh, spec.material, "ps", spec.body_force, spec.traction)
        K, load = assemble(spec0)
        red = apply_dirichlet(K, load, spec0)
        np.testing.assert_array_equal(red.rhs, load[red.free])

    def test_example2_clamped_values(self):
        spec, exact = case_spec(2, "ps", nu=0.4)
        sol = solve_problem(spec)
        nodes = spec.mesh.nodes
        left = np.flatnonzero(nodes[:, 0] == 0)
        nu = 0.4
        expect = np.stack([0 * nodes[left, 1], nu * (1 + nu) * (nodes[left, 1] ** 2 - 1)], -1)
        np.testing.assert_allclose(sol.nodal()[left], expect, atol=1e-15)

    def test_rigid_motion(self):
        mesh = generate_regular(
            3, 2, (0, 1), (0, 1), boundary_spec=lambda x, y: DIRICHLET if x == 0 or y == 0 else neumann("free")
        )
        rigid = lambda x, y: np.stack([0.1 - 0.3 * y, -0.2 + 0.3 * x], -1)  # noqa: E731
        for kind in ("ps", "ecq4"):
            sol = solve_problem(ProblemSpec(mesh, STEEL, kind, dirichlet_value=rigid))
            np.testing.assert_allclose(sol.nodal(), rigid(mesh.nodes[:, 0], mesh.nodes[:, 1]), atol=1e-12)
            assert np.abs(sol.beta).max() < 1e-9


class TestSolveProblem:
    @pytest.mark.parametrize("kind", ["ps", "ecq4"])
    def test_example1_regular_exact_stress(self, kind):
        spec, exact = case_spec(1, kind, level=2, nu=0.25)
        assert error_norms(solve_problem(spec), exact).e_stress_rel <= 1e-9

    def test_example1_irregular_table_value(self):
        spec, exact = case_spec(1, "ps", "irregular", level=1, nu=0.25)
        assert error_norms(solve_problem(spec), exact).e_disp_rel == pytest.approx(0.06303, rel=0.02)

    @staticmethod
    def _patch(mesh, kind):
        m = Material(1.0, 0.3)
        u = lambda x, y: np.stack([(x + y) / 2, (x - y) / 2], -1)  # noqa: E731
        mu = m.mu
        normals = {"right": (1, 0), "bottom": (0, -1), "top": (0, 1)}

        def traction(x, y, tag):
            nx, ny = normals[tag]
            val = np.array([mu * nx + mu * ny, mu * nx - mu * ny])
            return np.broadcast_to(val, np.shape(x) + (2,))

        sol = solve_problem(ProblemSpec(mesh, m, kind, traction=traction, dirichlet_value=u))
        return np.abs(sol.nodal() - u(mesh.nodes[:, 0], mesh.nodes[:, 1])).max()

    @pytest.mark.parametrize("kind", ["ps", "ecq4"])
    def test_linear_patch_regular(self, kind):
        assert self._patch(bench.build_mesh("regular", 1), kind) < 1e-10

    def test_linear_patch_irregular(self):
        mesh = bench.build_mesh("irregular", 1)
        assert self._patch(mesh, "ps") < 1e-10
        # the ECQ4 space loses the constants once a12, b12 != 0
        assert self._patch(mesh, "ecq4") > 1e-3

    def test_nearly_incompressible_residual(self):
        spec, _ = case_spec(2, "ps", level=3, nu=0.49999)
        sol = solve_problem(spec)
        assert sol.stats["residual"] <= 1e-10
        assert sol.stats["ndof"] == 2 * 41 * 9

    def test_bilinear_has_no_beta(self):
        spec, _ = case_spec(1, "bilinear", level=0)
        assert solve_problem(spec).beta is None

    @pytest.mark.parametrize("kind", ["ps", "ecq4"])
    def test_elementwise_consistency(self, kind):
        spec, _ = case_spec(2, kind, "irregular", level=2, nu=0.499)
        sol = solve_problem(spec)
        ue = sol.element_displacements()
        for k in range(spec.mesh.n_elements):
            g = spec.mesh.geometry(k)
            H = element_H(g, spec.material, kind)
            Gu = element_G(g, kind) @ ue[k]
            assert np.abs(H @ sol.beta[k] - Gu).max() <= 1e-11 * max(np.abs(Gu).max(), 1.0)

    @pytest.mark.parametrize("kind", ["ps", "ecq4"])
    def test_galerkin_orthogonality(self, kind):
        spec, exact = case_spec(3, kind, "irregular", level=2)
        sol = solve_problem(spec)
        mesh = spec.mesh
        dofs = element_dofs(mesh)
        internal = np.zeros(2 * mesh.n_nodes)
        external = np.zeros_like(internal)
        rule = gauss_rule(5)
        for k in range(mesh.n_elements):
            g = mesh.geometry(k)
            internal[dofs[k]] += element_G(g, kind).T @ sol.beta[k]
            for xi, eta, w in rule:
                x, y = map_ref_to_phys(g, xi, eta)
                f = exact.f(np.array(x), np.array(y))
                N = shape_values(xi, eta)
                external[dofs[k][0::2]] += w * g.jacobian(xi, eta) * N * f[0]
                external[dofs[k][1::2]] += w * g.jacobian(xi, eta) * N * f[1]
        s, wts = gauss_1d(5)
        t = 0.5 * (s + 1)
        for e in mesh.edges:
            if e.label.kind != "neumann":
                continue
            a, b = e.nodes
            pts = np.outer(1 - t, mesh.nodes[a]) + np.outer(t, mesh.nodes[b])
            gv = exact.g(pts[:, 0], pts[:, 1], e.label.tag)
            for node, phi in ((a, 1 - t), (b, t)):
                external[2 * node: 2 * node + 2] += 0.5 * e.length * (wts * phi) @ gv
        free = np.setdiff1d(np.arange(len(internal)), np.concatenate([2 * mesh.dirichlet_nodes(), 2 * mesh.dirichlet_nodes() + 1]))
        gap = np.abs(internal[free] - external[free]).max()
        assert gap <= 1e-9 * np.linalg.norm(external[free])

    def test_deterministic(self):
        spec, _ = case_spec(3, "ecq4", "irregular", level=2)
        a, b = solve_problem(spec), solve_problem(spec)
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.beta, b.beta)
        assert solution_to_json(a) == solution_to_json(b)

    @pytest.mark.parametrize("example", [1, 2, 3])
    @pytest.mark.parametrize("kind", ["ps", "ecq4"])
    def test_refinement_monotone(self, example, kind):
        nu = 0.4999 if example == 2 else 0.25
        errs = []
        for level in range(1, 5) if example == 3 else range(4):
            spec, exact = case_spec(example, kind, "irregular", level, nu)
            errs.append(error_norms(solve_problem(spec), exact))
        disp = [r.e_disp_rel for r in errs]
        stress = [r.e_stress_rel for r in errs]
        assert all(b < a for a, b in zip(disp, disp[1:]))
        assert all(b < a for a, b in zip(stress, stress[1:]))


def test_solution_json_fields():
    spec, _ = case_spec(1, "ps", level=0)
    payload = json.loads(solution_to_json(solve_problem(spec)))
    assert {"u", "beta", "mode", "residual"} <= payload.keys()
    assert payload["mode"] == "ps"
    assert len(payload["u"]) == 12 and len(payload["beta"]) == 5
    assert "seconds" not in payload["stats"]
