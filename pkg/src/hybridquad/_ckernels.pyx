# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef double GP = 0.57735026918962576451  # 1/sqrt(3)


cdef inline void _coeffs(double[:, :, ::1] z, Py_ssize_t e, double* a, double* b) noexcept nogil:
    cdef double x1 = z[e, 0, 0], x2 = z[e, 1, 0], x3 = z[e, 2, 0], x4 = z[e, 3, 0]
    cdef double y1 = z[e, 0, 1], y2 = z[e, 1, 1], y3 = z[e, 2, 1], y4 = z[e, 3, 1]
    a[0] = 0.25 * (x1 + x2 + x3 + x4)
    a[1] = 0.25 * (-x1 + x2 + x3 - x4)
    a[2] = 0.25 * (-x1 - x2 + x3 + x4)
    a[3] = 0.25 * (x1 - x2 + x3 - x4)
    b[0] = 0.25 * (y1 + y2 + y3 + y4)
    b[1] = 0.25 * (-y1 + y2 + y3 - y4)
    b[2] = 0.25 * (-y1 - y2 + y3 + y4)
    b[3] = 0.25 * (y1 - y2 + y3 - y4)


cdef inline double _strain_matrix(double* a, double* b, double xi, double eta, double* B) noexcept nogil:
    """Fill B (3x8, row-major) and return J."""
    cdef double J = (a[1] * b[2] - a[2] * b[1]) + (a[1] * b[3] - a[3] * b[1]) * xi \
        + (a[3] * b[2] - a[2] * b[3]) * eta
    cdef double A00 = b[2] + b[3] * xi, A01 = -a[2] - a[3] * xi
    cdef double A10 = -b[1] - b[3] * eta, A11 = a[1] + a[3] * eta
    cdef double dxi[4]
    cdef double deta[4]
    cdef double dx, dy
    cdef int n
    dxi[0] = -0.25 * (1 - eta); dxi[1] = 0.25 * (1 - eta)
    dxi[2] = 0.25 * (1 + eta); dxi[3] = -0.25 * (1 + eta)
    deta[0] = -0.25 * (1 - xi); deta[1] = -0.25 * (1 + xi)
    deta[2] = 0.25 * (1 + xi); deta[3] = 0.25 * (1 - xi)
    for n in range(24):
        B[n] = 0.0
    for n in range(4):
        dx = (A00 * dxi[n] + A10 * deta[n]) / J
        dy = (A01 * dxi[n] + A11 * deta[n]) / J
        B[2 * n] = dx
        B[8 + 2 * n + 1] = dy
        B[16 + 2 * n] = dy
        B[16 + 2 * n + 1] = dx
    return J


cdef inline void _stress_mode(double* a, double* b, bint ecq4, double xi, double eta, double* P) noexcept nogil:
    cdef double a1 = a[1], a2 = a[2], a12 = a[3]
    cdef double b1 = b[1], b2 = b[2], b12 = b[3]
    cdef int n
    for n in range(15):
        P[n] = 0.0
    P[0] = 1.0
    P[6] = 1.0
    P[12] = 1.0
    P[3] = eta
    P[8] = (b1 * b1) / (a1 * a1) * eta
    P[13] = b1 / a1 * eta
    P[4] = (a2 * a2) / (b2 * b2) * xi
    P[9] = xi
    P[14] = a2 / b2 * xi
    if ecq4:
        P[0] += -b12 / b2 * xi
        P[1] += a12 * a2 / (b2 * b2) * xi
        P[2] += (a12 * b2 - a2 * b12) / (b2 * b2) * xi
        P[5] += b1 * b12 / (a1 * a1) * eta
        P[6] += -a12 / a1 * eta
        P[7] += (a1 * b12 - a12 * b1) / (a1 * a1) * eta
        P[10] += b12 / a1 * eta
        P[11] += a12 / b2 * xi
        P[12] += -b12 / b2 * xi - a12 / a1 * eta


def hybrid_stiffness(corners, double mu, double lam, str mode):
    cdef double[:, :, ::1] z = np.ascontiguousarray(corners, dtype=np.float64)
    cdef Py_ssize_t ne = z.shape[0]
    cdef bint ecq4
    if mode == "ecq4":
        ecq4 = True
    elif mode == "ps":
        ecq4 = False
    else:
        raise ValueError(f"unknown stress mode {mode!r}")
    Karr = np.empty((ne, 8, 8))
    Harr = np.empty((ne, 5, 5))
    Garr = np.empty((ne, 5, 8))
    cdef double[:, :, ::1] K = Karr
    cdef double[:, :, ::1] H = Harr
    cdef double[:, :, ::1] G = Garr
    cdef double k = lam / (2.0 * (mu + lam))
    cdef double S[9]
    S[0] = (1 - k) / (2 * mu); S[1] = -k / (2 * mu); S[2] = 0.0
    S[3] = -k / (2 * mu); S[4] = (1 - k) / (2 * mu); S[5] = 0.0
    S[6] = 0.0; S[7] = 0.0; S[8] = 1.0 / mu
    cdef double gx[4]
    cdef double gy[4]
    gx[0] = -GP; gx[1] = -GP; gx[2] = GP; gx[3] = GP
    gy[0] = -GP; gy[1] = GP; gy[2] = -GP; gy[3] = GP
    cdef double a[4]
    cdef double b[4]
    cdef double B[24]
    cdef double P[15]
    cdef double SP[15]
    cdef double Hl[25]
    cdef double Gl[40]
    cdef double L[25]
    cdef double s, J
    cdef Py_ssize_t e
    cdef int q, i, j, c, d, r
    cdef int failed = -1
    with nogil:
        for e in range(ne):
            _coeffs(z, e, a, b)
            for i in range(25):
                Hl[i] = 0.0
            for i in range(40):
                Gl[i] = 0.0
            for q in range(4):
                J = _strain_matrix(a, b, gx[q], gy[q], B)
                _stress_mode(a, b, ecq4, gx[q], gy[q], P)
                # SP = S @ P
                for c in range(3):
                    for j in range(5):
                        s = 0.0
                        for d in range(3):
                            s = s + S[3 * c + d] * P[5 * d + j]
                        SP[5 * c + j] = s
                for i in range(5):
                    for j in range(5):
                        s = 0.0
                        for c in range(3):
                            s = s + P[5 * c + i] * SP[5 * c + j]
                        Hl[5 * i + j] += J * s
                    for j in range(8):
                        s = 0.0
                        for c in range(3):
                            s = s + P[5 * c + i] * B[8 * c + j]
                        Gl[8 * i + j] += J * s
            for i in range(5):
                for j in range(5):
                    H[e, i, j] = 0.5 * (Hl[5 * i + j] + Hl[5 * j + i])
                for j in range(8):
                    G[e, i, j] = Gl[8 * i + j]
            # Cholesky H = L L^T
            for i in range(25):
                L[i] = 0.0
            for j in range(5):
                s = H[e, j, j]
                for r in range(j):
                    s = s - L[5 * j + r] * L[5 * j + r]
                if s <= 0.0:
                    failed = e
                    break
                L[5 * j + j] = sqrt(s)
                for i in range(j + 1, 5):
                    s = H[e, i, j]
                    for r in range(j):
                        s = s - L[5 * i + r] * L[5 * j + r]
                    L[5 * i + j] = s / L[5 * j + j]
            if failed >= 0:
                break
            # forward solve L Y = G, in place in Gl
            for j in range(8):
                for i in range(5):
                    s = Gl[8 * i + j]
                    for r in range(i):
                        s = s - L[5 * i + r] * Gl[8 * r + j]
                    Gl[8 * i + j] = s / L[5 * i + i]
            for i in range(8):
                for j in range(i, 8):
                    s = 0.0
                    for r in range(5):
                        s = s + Gl[8 * r + i] * Gl[8 * r + j]
                    K[e, i, j] = s
                    K[e, j, i] = s
    if failed >= 0:
        raise np.linalg.LinAlgError(f"H not positive definite in element {failed}")
    return Karr, Harr, Garr


def bilinear_stiffness(corners, double mu, double lam, int order=5):
    cdef double[:, :, ::1] z = np.ascontiguousarray(corners, dtype=np.float64)
    cdef Py_ssize_t ne = z.shape[0]
    x1d, w1d = np.polynomial.legendre.leggauss(order)
    cdef double[::1] xs = x1d
    cdef double[::1] ws = w1d
    Karr = np.zeros((ne, 8, 8))
    cdef double[:, :, ::1] K = Karr
    cdef double D[9]
    D[0] = 2 * mu + lam; D[1] = lam; D[2] = 0.0
    D[3] = lam; D[4] = 2 * mu + lam; D[5] = 0.0
    D[6] = 0.0; D[7] = 0.0; D[8] = mu
    cdef double a[4]
    cdef double b[4]
    cdef double B[24]
    cdef double DB[24]
    cdef double s, J, w
    cdef Py_ssize_t e
    cdef int p, q, i, j, c, d
    with nogil:
        for e in range(ne):
            _coeffs(z, e, a, b)
            for p in range(order):
                for q in range(order):
                    J = _strain_matrix(a, b, xs[p], xs[q], B)
                    w = ws[p] * ws[q] * J
                    for c in range(3):
                        for j in range(8):
                            s = 0.0
                            for d in range(3):
                                s = s + D[3 * c + d] * B[8 * d + j]
                            DB[8 * c + j] = s
                    for i in range(8):
                        for j in range(i, 8):
                            s = 0.0
                            for c in range(3):
                                s = s + B[8 * c + i] * DB[8 * c + j]
                            K[e, i, j] += w * s
            for i in range(8):
                for j in range(i + 1, 8):
                    K[e, j, i] = K[e, i, j]
    return Karr
