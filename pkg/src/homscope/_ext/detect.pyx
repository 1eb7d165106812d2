# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled detection kernel; mirrors homscope._kernels_py.detect_pairs."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int ARM_A[4]
cdef int ARM_B[4]
ARM_A[:] = [0, 1, 1, 0]
ARM_B[:] = [1, 0, 1, 0]


cdef inline int _pick(const double[:, ::1] cum, int arm, double u) noexcept nogil:
    cdef int k = 0
    while k < 3 and u >= cum[arm, k]:
        k += 1
    return arm * 4 + k


def detect_pairs(codes, uniforms, transmission, cum_ratios, efficiencies):
    cdef const cnp.int8_t[::1] c = np.ascontiguousarray(codes, dtype=np.int8)
    cdef const double[:, ::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[:, ::1] cum = np.ascontiguousarray(cum_ratios, dtype=np.float64)
    cdef const double[::1] eff = np.ascontiguousarray(efficiencies, dtype=np.float64)
    cdef double t_a = transmission[0]
    cdef double t_b = transmission[1]

    coinc_arr = np.zeros((8, 8), dtype=np.int64)
    singles_arr = np.zeros(8, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] coinc = coinc_arr
    cdef cnp.int64_t[::1] singles = singles_arr

    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t k
    cdef int code, ch_a, ch_b
    cdef bint det_a, det_b
    with nogil:
        for k in range(n):
            code = c[k]
            ch_a = _pick(cum, ARM_A[code], u[k, 2])
            ch_b = _pick(cum, ARM_B[code], u[k, 3])
            det_a = u[k, 0] < t_a and u[k, 4] < eff[ch_a]
            det_b = u[k, 1] < t_b and u[k, 5] < eff[ch_b]
            if det_a and det_b:
                if ch_a == ch_b:
                    singles[ch_a] += 1
                else:
                    singles[ch_a] += 1
                    singles[ch_b] += 1
                    if ch_a < ch_b:
                        coinc[ch_a, ch_b] += 1
                    else:
                        coinc[ch_b, ch_a] += 1
            elif det_a:
                singles[ch_a] += 1
            elif det_b:
                singles[ch_b] += 1
    return coinc_arr, singles_arr
