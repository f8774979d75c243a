# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-step RK4 for batches of deviation-coordinate states."""
import numpy as np
from libc.math cimport sin


cdef inline void _field(const double* x, double* out, Py_ssize_t n, Py_ssize_t m,
                        const long long* ei, const long long* ej, const double* a,
                        const double* th, const double* s0, const double* dinv,
                        const double* p) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double flow
    for i in range(n):
        out[i] = p[i]
    for k in range(m):
        flow = a[k] * (sin(x[ei[k]] - x[ej[k]] + th[k]) - s0[k])
        out[ei[k]] -= flow
        out[ej[k]] += flow
    for i in range(n):
        out[i] *= dinv[i]


def rk4_advance(double[:, ::1] x, const long long[::1] ei, const long long[::1] ej,
                const double[::1] a, const double[::1] th, const double[::1] dinv,
                const double[:, ::1] p, double h, Py_ssize_t nsteps, double[:, :, ::1] out):
    """Advance every row of ``x`` by ``nsteps`` RK4 steps under constant ``p``.

    ``out`` of shape ``(nsteps, batch, n)`` receives the state after each
    step; pass a zero-length first axis to skip recording.
    """
    cdef Py_ssize_t batch = x.shape[0], n = x.shape[1], m = a.shape[0]
    cdef Py_ssize_t b, s, i
    cdef bint record = out.shape[0] > 0
    cdef double[::1] s0 = np.sin(np.asarray(th))
    cdef double[::1] k1 = np.empty(n), k2 = np.empty(n), k3 = np.empty(n), k4 = np.empty(n), tmp = np.empty(n)
    cdef double hh = 0.5 * h, h6 = h / 6.0
    with nogil:
        for b in range(batch):
            for s in range(nsteps):
                _field(&x[b, 0], &k1[0], n, m, &ei[0], &ej[0], &a[0], &th[0], &s0[0], &dinv[0], &p[b, 0])
                for i in range(n):
                    tmp[i] = x[b, i] + hh * k1[i]
                _field(&tmp[0], &k2[0], n, m, &ei[0], &ej[0], &a[0], &th[0], &s0[0], &dinv[0], &p[b, 0])
                for i in range(n):
                    tmp[i] = x[b, i] + hh * k2[i]
                _field(&tmp[0], &k3[0], n, m, &ei[0], &ej[0], &a[0], &th[0], &s0[0], &dinv[0], &p[b, 0])
                for i in range(n):
                    tmp[i] = x[b, i] + h * k3[i]
                _field(&tmp[0], &k4[0], n, m, &ei[0], &ej[0], &a[0], &th[0], &s0[0], &dinv[0], &p[b, 0])
                for i in range(n):
                    x[b, i] = x[b, i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if record:
                    for i in range(n):
                        out[s, b, i] = x[b, i]
