"""Vectorized numpy implementations of the hot loops.

Every function here has a twin in ``_numba`` with the same signature and the
same arithmetic order, so both backends agree to the last few ulps.
"""

from __future__ import annotations

import numpy as np

_S3 = 1.0 / np.sqrt(3.0)
_SIGNS = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
)


def _sgn(x):
    # sgn(0) = +1
    return np.where(x >= 0.0, 1, -1)


def sector_index(a):
    x, y, z = a[:, 0], a[:, 1], a[:, 2]
    d = np.stack([x + y + z, x - y - z, -x + y - z, -x - y + z], axis=1)
    return np.argmax(d, axis=1).astype(np.int64)


def pcrit_map(a, wz):
    out = a.copy()
    mag = np.abs(a)
    k = np.argmax(mag, axis=1)
    rows = np.arange(a.shape[0])
    big = mag[rows, k]
    capped = big > wz
    if not np.any(capped):
        return out
    idx = rows[capped]
    kk = k[capped]
    sub = a[idx]
    perp = sub.copy()
    perp[np.arange(idx.size), kk] = 0.0
    r = np.sqrt(np.sum(perp * perp, axis=1))
    degenerate = r == 0.0
    if np.any(degenerate):
        # exactly +-e_k: fall back to e_{(k+1) mod 3}
        d = np.flatnonzero(degenerate)
        perp[d, (kk[d] + 1) % 3] = 1.0
        r[d] = 1.0
    scale = np.sqrt(1.0 - wz * wz) / r
    new = perp * scale[:, None]
    new[np.arange(idx.size), kk] = np.where(sub[np.arange(idx.size), kk] >= 0.0, wz, -wz)
    out[idx] = new
    return out


def capped_map(a, caps):
    """Closest-overlap vector with |v| <= 1 and |v_k| <= caps[k] (water filling)."""
    n = a.shape[0]
    mag = np.abs(a)
    sat = np.zeros((n, 3), dtype=bool)
    done = np.zeros(n, dtype=bool)
    scale = np.zeros(n)
    for _ in range(3):
        rem = 1.0 - np.sum(np.where(sat, caps * caps, 0.0), axis=1)
        a2 = np.sum(np.where(sat, 0.0, mag * mag), axis=1)
        ok = (~done) & (a2 > 0.0) & (rem > 0.0)
        s = np.zeros(n)
        s[ok] = np.sqrt(rem[ok] / a2[ok])
        viol = (~sat) & (s[:, None] * mag > caps) & ok[:, None]
        finished = ok & ~np.any(viol, axis=1)
        scale[finished] = s[finished]
        done |= finished | ~ok
        sat |= viol
    v = np.where(sat, caps, np.minimum(scale[:, None] * mag, caps))
    return np.where(a >= 0.0, v, -v)


def linear_probabilities(m, b):
    """P(c0, c1, beta) = (1 + beta (R_c m).b) / 8, shape (N, 2, 2, 2)."""
    prod = m * b
    sx, sy, sz = _SIGNS[:, 0], _SIGNS[:, 1], _SIGNS[:, 2]
    e = sx * prod[:, 0, None] + sy * prod[:, 1, None] + sz * prod[:, 2, None]  # (N, 4)
    p = np.empty((m.shape[0], 4, 2))
    p[:, :, 0] = np.maximum(0.0, (1.0 - e) * 0.125)
    p[:, :, 1] = np.maximum(0.0, (1.0 + e) * 0.125)
    return p.reshape(-1, 2, 2, 2)


def sample_categorical(p, u):
    cdf = np.cumsum(p, axis=1)
    target = u * cdf[:, -1]
    idx = np.sum(target[:, None] >= cdf, axis=1)
    return np.minimum(idx, p.shape[1] - 1).astype(np.int64)


def toner_bacon(a, b, l1, l2):
    s1 = _sgn(np.sum(a * l1, axis=1))
    s2 = _sgn(np.sum(a * l2, axis=1))
    alpha = -s1
    c = s1 * s2
    bob = _sgn(np.sum(b * (l1 + c[:, None] * l2), axis=1))
    beta = -alpha * bob
    c0 = (1 - alpha) // 2
    c1 = (1 - c) // 2
    return c0.astype(np.int64), c1.astype(np.int64), beta.astype(np.int64)


def _rotate(q, v, transpose):
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m00 = 1 - 2 * (y * y + z * z)
    m01 = 2 * (x * y - w * z)
    m02 = 2 * (x * z + w * y)
    m10 = 2 * (x * y + w * z)
    m11 = 1 - 2 * (x * x + z * z)
    m12 = 2 * (y * z - w * x)
    m20 = 2 * (x * z - w * y)
    m21 = 2 * (y * z + w * x)
    m22 = 1 - 2 * (x * x + y * y)
    vx, vy, vz = v[:, 0], v[:, 1], v[:, 2]
    if transpose:
        return np.stack(
            [m00 * vx + m10 * vy + m20 * vz, m01 * vx + m11 * vy + m21 * vz, m02 * vx + m12 * vy + m22 * vz],
            axis=1,
        )
    return np.stack(
        [m00 * vx + m01 * vy + m02 * vz, m10 * vx + m11 * vy + m12 * vz, m20 * vx + m21 * vy + m22 * vz],
        axis=1,
    )


def frame_gisin(a, b, q, u):
    local = _rotate(q, a, transpose=True)
    k = sector_index(local)
    t00 = np.full_like(a, _S3)
    hidden = _rotate(q, t00, transpose=False)
    mean = np.sum(b * hidden, axis=1)
    beta = np.where(u < 0.5 * (1.0 + mean), 1, -1).astype(np.int64)
    return k >> 1, k & 1, beta, hidden
