"""Bloch-sphere vectors, the four Pauli-frame rotations and the tetrahedral sectors.

Rotations are stored as sign patterns: every matrix is diagonal with entries
in {-1, +1}, so applying one is an elementwise product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

UNIT_TOL = 1e-12

# SIGNS[c0, c1] is the diagonal of the rotation attached to outcome (c0, c1).
SIGNS = np.array(
    [
        [[1, 1, 1], [1, -1, -1]],
        [[-1, 1, -1], [-1, -1, 1]],
    ],
    dtype=np.int64,
)

T00 = np.full(3, 1.0 / math.sqrt(3.0))
# TETRAHEDRON[c0, c1] = R_{c0 c1} t00, exactly.
TETRAHEDRON = SIGNS * T00

AXES = np.eye(3)


@dataclass(frozen=True)
class BlochVector:
    """Unit vector on the sphere.

    Inputs within ``UNIT_TOL`` of unit norm are renormalized, anything else is
    rejected.
    """

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        v = as_unit((self.x, self.y, self.z))
        object.__setattr__(self, "x", float(v[0]))
        object.__setattr__(self, "y", float(v[1]))
        object.__setattr__(self, "z", float(v[2]))

    @classmethod
    def of(cls, v) -> BlochVector:
        if isinstance(v, BlochVector):
            return v
        x, y, z = np.asarray(v, dtype=float).reshape(3)
        return cls(x, y, z)

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> BlochVector:
        st = math.sin(theta)
        return cls(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype)

    def dot(self, other) -> float:
        return float(np.dot(self.array, np.asarray(other, dtype=float)))

    def __neg__(self) -> BlochVector:
        return BlochVector(-self.x, -self.y, -self.z)


def as_unit(v, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``v`` (shape ``(..., 3)``) as float unit vectors.

    Raises ``ValueError`` when any norm is further than ``tol`` from one.
    """
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"expected vectors with 3 components, got shape {arr.shape}")
    norm = np.sqrt(np.sum(arr * arr, axis=-1))
    bad = np.abs(norm - 1.0) > tol
    if np.any(bad):
        worst = float(np.max(np.abs(norm - 1.0)))
        raise ValueError(f"not a unit vector (|norm - 1| = {worst:.3g} > {tol:g})")
    return arr / norm[..., None]


@dataclass(frozen=True)
class PauliRotation:
    """One of the four teleportation corrections R_{c0 c1}."""

    c0: int
    c1: int

    def __post_init__(self) -> None:
        if self.c0 not in (0, 1) or self.c1 not in (0, 1):
            raise ValueError(f"rotation index must be a pair of bits, got ({self.c0}, {self.c1})")

    @property
    def index(self) -> tuple[int, int]:
        return (self.c0, self.c1)

    @property
    def signs(self) -> np.ndarray:
        return SIGNS[self.c0, self.c1]

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(SIGNS[self.c0, self.c1])

    def __matmul__(self, other):
        if isinstance(other, PauliRotation):
            return PauliRotation(self.c0 ^ other.c0, self.c1 ^ other.c1)
        return apply_rotation(self, other)


def rotation(c0: int, c1: int) -> PauliRotation:
    return PauliRotation(int(c0), int(c1))


def apply_rotation(r: PauliRotation, v):
    """Rotate ``v`` by ``r``. Batched over leading axes for array input."""
    if isinstance(v, BlochVector):
        x, y, z = r.signs * v.array
        return BlochVector(x, y, z)
    return r.signs * np.asarray(v, dtype=float)


@dataclass(frozen=True)
class Sector:
    """Quarter S_ij of the sphere, the Voronoi cell of ``t_ij``."""

    i: int
    j: int

    @property
    def index(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def center(self) -> BlochVector:
        return BlochVector.of(TETRAHEDRON[self.i, self.j])


def sector_index(a) -> np.ndarray:
    """Flat sector label ``2*i + j`` for each row of ``a``.

    Ties go to the lexicographically lowest (i, j).
    """
    arr = np.ascontiguousarray(np.asarray(a, dtype=float).reshape(-1, 3))
    out = kernels.sector_index(arr)
    return out.reshape(np.shape(a)[:-1])


def sector_of(a) -> Sector:
    k = int(sector_index(as_unit(a)))
    return Sector(k >> 1, k & 1)


def from_angles(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def to_angles(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    theta = np.arccos(np.clip(v[..., 2], -1.0, 1.0))
    phi = np.arctan2(v[..., 1], v[..., 0])
    return theta, phi


def sample_uniform_sphere(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform points on S^2: z uniform on [-1, 1], azimuth uniform on [0, 2pi)."""
    z = rng.uniform(-1.0, 1.0, size)
    phi = rng.uniform(0.0, 2.0 * math.pi, size)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def sample_unit_quaternions(rng: np.random.Generator, size: int) -> np.ndarray:
    q = rng.standard_normal((size, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def quaternion_to_matrix(q) -> np.ndarray:
    """Rotation matrices for unit quaternions ``(w, x, y, z)``, shape ``(N, 3, 3)``."""
    q = np.asarray(q, dtype=float).reshape(-1, 4)
    w, x, y, z = q.T
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=1,
    )


def random_rotations(rng: np.random.Generator, size: int) -> np.ndarray:
    """Haar-uniform rotation matrices from uniform unit quaternions."""
    return quaternion_to_matrix(sample_unit_quaternions(rng, size))
