"""Pure fallbacks for the hot kernels.

Same contracts as the compiled twins in ``_kernels.pyx``; selected by
``sonogrid.kernels`` when the extension is unavailable (or when
``SONOGRID_PURE=1``). The Hartley transform runs as plain Python loops,
the grid fill leans on numpy broadcasting.
"""

from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


def fht_radix2(x: np.ndarray) -> None:
    """In-place radix-2 decimation-in-time fast Hartley transform.

    ``x`` must be a 1-d float64 array whose length is a power of two.
    Computes the unnormalized transform H[k] = sum x[n]*cas(2*pi*k*n/N).
    """
    n = x.shape[0]
    buf = x.tolist()

    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            buf[i], buf[j] = buf[j], buf[i]

    size = 2
    while size <= n:
        half = size >> 1
        step = 2.0 * math.pi / size
        for base in range(0, n, size):
            # k = 0: cos=1, sin=0
            a = buf[base]
            b = buf[base + half]
            buf[base] = a + b
            buf[base + half] = a - b
            if half >= 2:
                # k = half/2: cos=0, sin=1, retrograde index maps to itself
                q = base + (half >> 1)
                a = buf[q]
                b = buf[q + half]
                buf[q] = a + b
                buf[q + half] = a - b
            for k in range(1, half >> 1):
                c = math.cos(step * k)
                s = math.sin(step * k)
                i0 = base + k            # E[k]
                i1 = base + half - k     # E[half-k]
                i2 = base + half + k     # O[k]
                i3 = base + size - k     # O[half-k]
                e0, e1, o0, o1 = buf[i0], buf[i1], buf[i2], buf[i3]
                t0 = c * o0 + s * o1
                t1 = -c * o1 + s * o0
                buf[i0] = e0 + t0
                buf[i1] = e1 + t1
                buf[i2] = e0 - t0
                buf[i3] = e1 - t1
        size <<= 1

    x[:] = buf


def idw_fill(
    node_lats: np.ndarray,
    node_lons: np.ndarray,
    node_vals: np.ndarray,
    cell_lats: np.ndarray,
    cell_lons: np.ndarray,
    power: float,
    r_max_m: float,
    snap_m: float,
    out: np.ndarray,
) -> None:
    """Fill ``out`` (rows x cols, NaN = absent) with inverse-distance-weighted values.

    Cell centers are the cross product of ``cell_lats`` (rows) and
    ``cell_lons`` (cols). A cell within ``snap_m`` of a node takes that
    node's value exactly; otherwise nodes within ``r_max_m`` contribute
    with weight 1/d^power. Weights are normalized by the largest weight
    before summing and the result is clamped to the contributing values'
    range, so the output is a true convex combination even in floats.
    """
    out[:] = np.nan
    n_nodes = node_vals.shape[0]
    if n_nodes == 0:
        return

    cols = cell_lons.shape[0]
    deg = math.pi / 180.0
    nlat = node_lats[None, None, :]
    nlon = node_lons[None, None, :]
    ncos = np.cos(np.radians(node_lats))[None, None, :]
    lon_deg = cell_lons[None, :, None]

    # bound the rows x cols x nodes temporaries to a few MB per chunk
    chunk = max(1, 2_000_000 // max(1, cols * n_nodes))
    for r0 in range(0, out.shape[0], chunk):
        r1 = min(r0 + chunk, out.shape[0])
        lat_deg = cell_lats[r0:r1][:, None, None]

        # differences in degrees first: scaling by pi/180 is sign-symmetric,
        # so exactly symmetric geometry yields bitwise-equal distances
        sin_dlat = np.sin((nlat - lat_deg) * deg / 2.0)
        sin_dlon = np.sin((nlon - lon_deg) * deg / 2.0)
        cos_cell = np.cos(np.radians(cell_lats[r0:r1]))[:, None, None]
        h = sin_dlat * sin_dlat + cos_cell * ncos * sin_dlon * sin_dlon
        dist = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))

        nearest = np.argmin(dist, axis=2)
        nearest_d = np.take_along_axis(dist, nearest[:, :, None], axis=2)[:, :, 0]

        in_range = dist <= r_max_m
        weights = np.where(in_range, 1.0 / np.power(np.maximum(dist, 1e-12), power), 0.0)
        wmax = weights.max(axis=2)
        has_any = wmax > 0.0
        safe_wmax = np.where(wmax == 0.0, 1.0, wmax)
        scaled = weights / safe_wmax[:, :, None]
        num = (scaled * node_vals[None, None, :]).sum(axis=2)
        den = scaled.sum(axis=2)

        vmin = np.min(np.where(in_range, node_vals[None, None, :], np.inf), axis=2)
        vmax = np.max(np.where(in_range, node_vals[None, None, :], -np.inf), axis=2)

        block = np.where(
            has_any,
            np.minimum(np.maximum(num / np.where(den == 0.0, 1.0, den), vmin), vmax),
            np.nan,
        )
        out[r0:r1] = np.where(nearest_d <= snap_m, node_vals[nearest], block)
