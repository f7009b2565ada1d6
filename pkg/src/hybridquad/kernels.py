"""Backend selection for the batched element stiffness kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``HYBRIDQUAD_BACKEND=python`` is set, the NumPy
implementation is used. Both expose ``hybrid_stiffness`` and
``bilinear_stiffness`` with identical signatures.
"""
from __future__ import annotations

import logging
import os

import numpy as np

from . import _pykernels
from .elements import SingularH

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def _select():
    wanted = os.environ.get("HYBRIDQUAD_BACKEND", "").lower()
    if wanted:
        if wanted not in BACKENDS:
            log.warning("backend %r unavailable, using python", wanted)
            return "python"
        return wanted
    return "cython" if "cython" in BACKENDS else "python"


BACKEND = _select()


def get_backend(name: str | None = None):
    return BACKENDS[name or BACKEND]


def hybrid_stiffness(corners, mu: float, lam: float, mode: str, backend: str | None = None):
    try:
        return get_backend(backend).hybrid_stiffness(corners, float(mu), float(lam), mode)
    except np.linalg.LinAlgError as err:
        raise SingularH(str(err)) from None


def bilinear_stiffness(corners, mu: float, lam: float, backend: str | None = None):
    return get_backend(backend).bilinear_stiffness(corners, float(mu), float(lam), 5)
