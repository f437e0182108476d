# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled streaming step kernel.

The per-frame column update is a chain of 14 dependent small matvecs; doing
it in one C loop avoids the per-call dispatch overhead that dominates the
pure numpy version. Accumulation is in double for both input precisions.
"""

from libc.math cimport exp

ctypedef fused real:
    float
    double


def temporal_column_step(real[:, :, ::1] w1, real[:, :, ::1] w2, real[:, ::1] bias,
                         real[:, ::1] past, real[::1] x0, real[:, ::1] out):
    """See ssnet._kernels_py.temporal_column_step for the contract."""
    cdef Py_ssize_t layers = w1.shape[0]
    cdef Py_ssize_t c = w1.shape[2]
    cdef Py_ssize_t l, i, k
    cdef double acc_v, acc_g, gate, p, q
    cdef real* cur = &x0[0]
    with nogil:
        for l in range(layers):
            for i in range(c):
                acc_v = bias[l, i]
                acc_g = bias[l, c + i]
                for k in range(c):
                    p = past[l, k]
                    q = cur[k]
                    acc_v += w1[l, i, k] * p + w2[l, i, k] * q
                    acc_g += w1[l, c + i, k] * p + w2[l, c + i, k] * q
                gate = 1.0 / (1.0 + exp(-acc_g))
                out[l, i] = <real> (acc_v * gate + cur[i])
            cur = &out[l, 0]
