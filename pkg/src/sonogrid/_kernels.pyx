# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: radix-2 Hartley transform and IDW grid fill.

Contracts match sonogrid._kernels_py exactly; sonogrid.kernels picks
whichever twin is importable.
"""

from libc.math cimport asin, cos, fmax, fmin, pow as c_pow, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double EARTH_RADIUS_M = 6371000.0
cdef double PI = 3.141592653589793238462643383279502884


def fht_radix2(double[::1] x not None):
    """In-place radix-2 decimation-in-time fast Hartley transform.

    ``x`` must be 1-d float64 with power-of-two length. Computes the
    unnormalized H[k] = sum x[n]*cas(2*pi*k*n/N).
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j, bit, size, half, base, k, q
    cdef Py_ssize_t i0, i1, i2, i3
    cdef double a, b, c, s, e0, e1, o0, o1, t0, t1, step

    with nogil:
        # bit-reversal permutation
        j = 0
        for i in range(1, n):
            bit = n >> 1
            while j & bit:
                j ^= bit
                bit >>= 1
            j |= bit
            if i < j:
                a = x[i]
                x[i] = x[j]
                x[j] = a

        size = 2
        while size <= n:
            half = size >> 1
            step = 2.0 * PI / size
            base = 0
            while base < n:
                a = x[base]
                b = x[base + half]
                x[base] = a + b
                x[base + half] = a - b
                if half >= 2:
                    q = base + (half >> 1)
                    a = x[q]
                    b = x[q + half]
                    x[q] = a + b
                    x[q + half] = a - b
                for k in range(1, half >> 1):
                    c = cos(step * k)
                    s = sin(step * k)
                    i0 = base + k
                    i1 = base + half - k
                    i2 = base + half + k
                    i3 = base + size - k
                    e0 = x[i0]
                    e1 = x[i1]
                    o0 = x[i2]
                    o1 = x[i3]
                    t0 = c * o0 + s * o1
                    t1 = -c * o1 + s * o0
                    x[i0] = e0 + t0
                    x[i1] = e1 + t1
                    x[i2] = e0 - t0
                    x[i3] = e1 - t1
                base += size
            size <<= 1


cdef double DEG = PI / 180.0


cdef inline double _haversine_deg(double lat1_deg, double cos_lat1, double lon1_deg,
                                  double lat2_deg, double cos_lat2, double lon2_deg) nogil:
    # differences taken in degrees first: scaling by pi/180 is sign-symmetric,
    # so exactly symmetric geometry yields bitwise-equal distances
    cdef double sdlat = sin((lat2_deg - lat1_deg) * DEG / 2.0)
    cdef double sdlon = sin((lon2_deg - lon1_deg) * DEG / 2.0)
    cdef double h = sdlat * sdlat + cos_lat1 * cos_lat2 * sdlon * sdlon
    if h < 0.0:
        h = 0.0
    elif h > 1.0:
        h = 1.0
    return 2.0 * EARTH_RADIUS_M * asin(sqrt(h))


def idw_fill(double[::1] node_lats not None,
             double[::1] node_lons not None,
             double[::1] node_vals not None,
             double[::1] cell_lats not None,
             double[::1] cell_lons not None,
             double power,
             double r_max_m,
             double snap_m,
             double[:, ::1] out not None):
    """Fill ``out`` (rows x cols, NaN = absent) with inverse-distance-weighted values.

    Semantics identical to the pure twin: exact value within ``snap_m`` of a
    node, 1/d^power weighting within ``r_max_m`` with max-weight
    normalization, result clamped to contributing values' range.
    """
    cdef Py_ssize_t rows = out.shape[0]
    cdef Py_ssize_t cols = out.shape[1]
    cdef Py_ssize_t n_nodes = node_vals.shape[0]
    cdef Py_ssize_t r, c, m, best
    cdef double nan = float("nan")
    cdef double cell_lat, cell_lon, cos_cell_lat, d, best_d
    cdef double wmax, w, num, den, vmin, vmax, val

    cdef double[::1] ncos = np.cos(np.radians(np.asarray(node_lats)))
    cdef double[::1] dists = np.empty(max(n_nodes, 1), dtype=np.float64)

    with nogil:
        for r in range(rows):
            cell_lat = cell_lats[r]
            cos_cell_lat = cos(cell_lat * DEG)
            for c in range(cols):
                if n_nodes == 0:
                    out[r, c] = nan
                    continue
                cell_lon = cell_lons[c]
                best = 0
                best_d = -1.0
                wmax = 0.0
                for m in range(n_nodes):
                    d = _haversine_deg(cell_lat, cos_cell_lat, cell_lon,
                                       node_lats[m], ncos[m], node_lons[m])
                    dists[m] = d
                    if best_d < 0.0 or d < best_d:
                        best_d = d
                        best = m
                    if d <= r_max_m:
                        w = 1.0 / c_pow(fmax(d, 1e-12), power)
                        if w > wmax:
                            wmax = w
                if best_d <= snap_m:
                    out[r, c] = node_vals[best]
                    continue
                if wmax == 0.0:
                    out[r, c] = nan
                    continue
                num = 0.0
                den = 0.0
                vmin = node_vals[best]
                vmax = node_vals[best]
                for m in range(n_nodes):
                    d = dists[m]
                    if d > r_max_m:
                        continue
                    w = (1.0 / c_pow(fmax(d, 1e-12), power)) / wmax
                    num += w * node_vals[m]
                    den += w
                    vmin = fmin(vmin, node_vals[m])
                    vmax = fmax(vmax, node_vals[m])
                val = num / den
                out[r, c] = fmin(fmax(val, vmin), vmax)
