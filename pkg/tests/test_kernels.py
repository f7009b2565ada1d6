import os
import subprocess
import sys

import numpy as np
import pytest

from hybridquad import kernels
from hybridquad.elements import Material, element_stiffness_bilinear, element_stiffness_hybrid
from hybridquad.mesh import compute_geometry, generate_irregular

from .helpers import random_quads

STEEL = Material(1.0, 0.3)
needs_cython = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled extension not built")


def batch(quads):
    return np.array([q.corners for q in quads])


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
@pytest.mark.parametrize("mode", ["ps", "ecq4"])
def test_hybrid_matches_reference(backend, mode):
    quads = random_quads(50, seed=7)
    K, H, G = kernels.hybrid_stiffness(batch(quads), STEEL.mu, STEEL.lam, mode, backend)
    for k, g in enumerate(quads):
        em = element_stiffness_hybrid(g, STEEL, mode)
        np.testing.assert_allclose(K[k], em.K, rtol=1e-12, atol=1e-12 * np.abs(em.K).max())
        np.testing.assert_allclose(H[k], em.H, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(G[k], em.G, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_bilinear_matches_reference(backend):
    quads = random_quads(50, seed=8)
    K = kernels.bilinear_stiffness(batch(quads), STEEL.mu, STEEL.lam, backend)
    for k, g in enumerate(quads):
        ref = element_stiffness_bilinear(g, STEEL)
        np.testing.assert_allclose(K[k], ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


@needs_cython
@pytest.mark.parametrize("kind", ["ps", "ecq4", "bilinear"])
def test_backends_agree_on_mesh(kind):
    corners = generate_irregular(3).corners()
    if kind == "bilinear":
        a = kernels.bilinear_stiffness(corners, 600.0, 6e7, "cython")
        b = kernels.bilinear_stiffness(corners, 600.0, 6e7, "python")
    else:
        a = kernels.hybrid_stiffness(corners, 600.0, 6e7, kind, "cython")[0]
        b = kernels.hybrid_stiffness(corners, 600.0, 6e7, kind, "python")[0]
    # lam/mu = 1e5 here; condensation rounding scales with the conditioning of H
    assert np.abs(a - b).max() <= 1e-10 * np.abs(b).max()


def test_default_backend_prefers_compiled():
    assert kernels.BACKEND == ("cython" if "cython" in kernels.BACKENDS else "python")


@pytest.mark.parametrize("value, expected", [("python", "python"), ("fortran", "python")])
def test_env_override(value, expected):
    env = dict(os.environ, HYBRIDQUAD_BACKEND=value)
    out = subprocess.run(
        [sys.executable, "-c", "import hybridquad; print(hybridquad.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expected


def test_thin_element_finite():
    # a 1000:1 sliver still condenses to a finite stiffness
    g = compute_geometry([(0, 0), (1, 0), (1, 1e-3), (0, 1e-3)])
    K = kernels.hybrid_stiffness(np.array([g.corners]), 1.0, 1.0, "ps")[0]
    assert np.all(np.isfinite(K))
