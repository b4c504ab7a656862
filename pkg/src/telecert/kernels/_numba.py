"""numba-compiled twins of the kernels in ``_numpy``."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_S3 = 1.0 / math.sqrt(3.0)


@njit(cache=True, nogil=True)
def _sector(x, y, z):
    d0 = x + y + z
    d1 = x - y - z
    d2 = -x + y - z
    d3 = -x - y + z
    best = 0
    bv = d0
    if d1 > bv:
        best, bv = 1, d1
    if d2 > bv:
        best, bv = 2, d2
    if d3 > bv:
        best, bv = 3, d3
    return best


@njit(cache=True, nogil=True)
def sector_index(a):
    n = a.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _sector(a[i, 0], a[i, 1], a[i, 2])
    return out


@njit(cache=True, nogil=True)
def pcrit_map(a, wz):
    n = a.shape[0]
    out = a.copy()
    perp = np.empty(3)
    for i in range(n):
        k = 0
        big = abs(a[i, 0])
        for j in range(1, 3):
            if abs(a[i, j]) > big:
                big = abs(a[i, j])
                k = j
        if big <= wz:
            continue
        r2 = 0.0
        for j in range(3):
            perp[j] = 0.0 if j == k else a[i, j]
            r2 += perp[j] * perp[j]
        r = math.sqrt(r2)
        if r == 0.0:
            perp[(k + 1) % 3] = 1.0
            r = 1.0
        scale = math.sqrt(1.0 - wz * wz) / r
        for j in range(3):
            out[i, j] = perp[j] * scale
        out[i, k] = wz if a[i, k] >= 0.0 else -wz
    return out


@njit(cache=True, nogil=True)
def capped_map(a, caps):
    n = a.shape[0]
    out = np.empty_like(a)
    sat = np.zeros(3, dtype=np.bool_)
    for i in range(n):
        for j in range(3):
            sat[j] = False
        scale = 0.0
        for _ in range(3):
            rem = 1.0
            a2 = 0.0
            for j in range(3):
                if sat[j]:
                    rem -= caps[j] * caps[j]
                else:
                    a2 += a[i, j] * a[i, j]
            if a2 <= 0.0 or rem <= 0.0:
                break
            s = math.sqrt(rem / a2)
            violated = False
            for j in range(3):
                if not sat[j] and s * abs(a[i, j]) > caps[j]:
                    sat[j] = True
                    violated = True
            if not violated:
                scale = s
                break
        for j in range(3):
            if sat[j]:
                v = caps[j]
            else:
                v = min(scale * abs(a[i, j]), caps[j])
            out[i, j] = v if a[i, j] >= 0.0 else -v
    return out


@njit(cache=True, nogil=True)
def linear_probabilities(m, b):
    n = m.shape[0]
    out = np.empty((n, 2, 2, 2))
    for i in range(n):
        px = m[i, 0] * b[i, 0]
        py = m[i, 1] * b[i, 1]
        pz = m[i, 2] * b[i, 2]
        for c0 in range(2):
            for c1 in range(2):
                sx = 1.0 - 2.0 * c0
                sy = 1.0 - 2.0 * c1
                e = sx * px + sy * py + (sx * sy) * pz
                out[i, c0, c1, 0] = max(0.0, (1.0 - e) * 0.125)
                out[i, c0, c1, 1] = max(0.0, (1.0 + e) * 0.125)
    return out


@njit(cache=True, nogil=True)
def sample_categorical(p, u):
    n, k = p.shape
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        total = 0.0
        for j in range(k):
            total += p[i, j]
        target = u[i] * total
        acc = 0.0
        pick = k - 1
        for j in range(k):
            acc += p[i, j]
            if target < acc:
                pick = j
                break
        out[i] = pick
    return out


@njit(cache=True, nogil=True)
def toner_bacon(a, b, l1, l2):
    n = a.shape[0]
    c0 = np.empty(n, dtype=np.int64)
    c1 = np.empty(n, dtype=np.int64)
    beta = np.empty(n, dtype=np.int64)
    for i in range(n):
        d1 = a[i, 0] * l1[i, 0] + a[i, 1] * l1[i, 1] + a[i, 2] * l1[i, 2]
        d2 = a[i, 0] * l2[i, 0] + a[i, 1] * l2[i, 1] + a[i, 2] * l2[i, 2]
        s1 = 1 if d1 >= 0.0 else -1
        s2 = 1 if d2 >= 0.0 else -1
        alpha = -s1
        c = s1 * s2
        db = (
            b[i, 0] * (l1[i, 0] + c * l2[i, 0])
            + b[i, 1] * (l1[i, 1] + c * l2[i, 1])
            + b[i, 2] * (l1[i, 2] + c * l2[i, 2])
        )
        bob = 1 if db >= 0.0 else -1
        beta[i] = -alpha * bob
        c0[i] = (1 - alpha) // 2
        c1[i] = (1 - c) // 2
    return c0, c1, beta


@njit(cache=True, nogil=True)
def frame_gisin(a, b, q, u):
    n = a.shape[0]
    c0 = np.empty(n, dtype=np.int64)
    c1 = np.empty(n, dtype=np.int64)
    beta = np.empty(n, dtype=np.int64)
    hidden = np.empty((n, 3))
    for i in range(n):
        w, x, y, z = q[i, 0], q[i, 1], q[i, 2], q[i, 3]
        m00 = 1 - 2 * (y * y + z * z)
        m01 = 2 * (x * y - w * z)
        m02 = 2 * (x * z + w * y)
        m10 = 2 * (x * y + w * z)
        m11 = 1 - 2 * (x * x + z * z)
        m12 = 2 * (y * z - w * x)
        m20 = 2 * (x * z - w * y)
        m21 = 2 * (y * z + w * x)
        m22 = 1 - 2 * (x * x + y * y)
        ax, ay, az = a[i, 0], a[i, 1], a[i, 2]
        lx = m00 * ax + m10 * ay + m20 * az
        ly = m01 * ax + m11 * ay + m21 * az
        lz = m02 * ax + m12 * ay + m22 * az
        k = _sector(lx, ly, lz)
        hx = (m00 * _S3 + m01 * _S3) + m02 * _S3
        hy = (m10 * _S3 + m11 * _S3) + m12 * _S3
        hz = (m20 * _S3 + m21 * _S3) + m22 * _S3
        hidden[i, 0] = hx
        hidden[i, 1] = hy
        hidden[i, 2] = hz
        mean = b[i, 0] * hx + b[i, 1] * hy + b[i, 2] * hz
        beta[i] = 1 if u[i] < 0.5 * (1.0 + mean) else -1
        c0[i] = k >> 1
        c1[i] = k & 1
    return c0, c1, beta, hidden
