import numpy as np
from hypothesis import strategies as st

from hybridquad.mesh import MeshError, compute_geometry

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_quad(rng: np.random.Generator, spread: float = 0.3):
    """Unit square with corners jittered by up to ``spread``; nonconvex draws are redrawn."""
    while True:
        corners = UNIT_SQUARE + rng.uniform(-spread, spread, size=(4, 2))
        try:
            return compute_geometry(corners)
        except MeshError:
            continue


def random_quads(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [random_quad(rng) for _ in range(n)]


@st.composite
def convex_quads(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_quad(np.random.default_rng(seed))

