"""Box-pair behaviours: the quantum teleporter and the classical fakes.

Every protocol maps Alice's input ``a`` and Bob's setting ``b`` to a
distribution over ``(c0, c1, beta)``. Probability arrays use the layout
``p[..., c0, c1, k]`` with ``k = (1 + beta) // 2``, so ``k = 0`` is
``beta = -1``.

All array methods are batched over leading axes. The module-level functions
(``ideal_distribution`` and friends) are the single-setting conveniences.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from . import kernels
from .geometry import (
    AXES,
    SIGNS,
    T00,
    TETRAHEDRON,
    BlochVector,
    as_unit,
    sample_uniform_sphere,
    sample_unit_quaternions,
    sector_index,
)

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2
INV_SQRT3 = 1.0 / math.sqrt(3.0)

_FLAT_SIGNS = SIGNS.reshape(4, 3).astype(float)
_FLAT_TETRA = TETRAHEDRON.reshape(4, 3)


class CapabilityError(ValueError):
    """The protocol cannot do what was asked (e.g. exact output from a sampler)."""


class CompensationMode(enum.Enum):
    SEPARATED = "separated"
    ACTIVE = "active"


@dataclass(frozen=True)
class OutcomeDistribution:
    """The eight probabilities P(c0, c1, beta | a, b) for one setting pair."""

    probabilities: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (2, 2, 2):
            raise ValueError(f"expected shape (2, 2, 2), got {p.shape}")
        if np.any(p < -1e-15):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls) -> OutcomeDistribution:
        return cls(np.full((2, 2, 2), 0.125))

    def __call__(self, c0: int, c1: int, beta: int) -> float:
        return float(self.probabilities[c0, c1, (1 + beta) // 2])

    def alice_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=-1)

    def bob_mean(self) -> float:
        return float(self.probabilities[..., 1].sum() - self.probabilities[..., 0].sum())

    def as_dict(self) -> dict[tuple[int, int, int], float]:
        return {
            (c0, c1, beta): self(c0, c1, beta)
            for c0 in (0, 1)
            for c1 in (0, 1)
            for beta in (-1, 1)
        }

    def __repr__(self) -> str:
        cells = ", ".join(f"{k}: {v:.6g}" for k, v in self.as_dict().items())
        return f"OutcomeDistribution({cells})"


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = as_unit(a)
    b = as_unit(b)
    a, b = np.broadcast_arrays(a, b)
    return a, b


def _flat(v) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(v, dtype=float).reshape(-1, 3))


def decode_outcomes(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat index ``4*c0 + 2*c1 + k`` to ``(c0, c1, beta)``."""
    return idx >> 2, (idx >> 1) & 1, 2 * (idx & 1) - 1


class Protocol:
    """A pair of boxes: Alice's emits ``(c0, c1)``, Bob's emits ``beta``.

    Subclasses provide ``probabilities`` when they have exact statistics and
    may override ``sample`` with a mechanistic sampler.
    """

    kind: ClassVar[str] = "protocol"
    supports_exact: ClassVar[bool] = True
    supports_sampling: ClassVar[bool] = True
    compensation: ClassVar[CompensationMode] = CompensationMode.SEPARATED

    @property
    def identifier(self) -> str:
        return self.kind

    @property
    def parameters(self) -> dict[str, float]:
        return {}

    # exact statistics ---------------------------------------------------
    def probabilities(self, a, b) -> np.ndarray:
        a, b = _pair(a, b)
        shape = a.shape[:-1]
        return self._probabilities(_flat(a), _flat(b)).reshape(shape + (2, 2, 2))

    def _probabilities(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"protocol {self.identifier!r} has no exact distribution")

    def distribution(self, a, b) -> OutcomeDistribution:
        return OutcomeDistribution(self.probabilities(a, b))

    # sampling -------------------------------------------------------------
    def sample(self, a, b, rng: np.random.Generator):
        """Draw one run per row of ``(a, b)``; returns ``(c0, c1, beta)``."""
        a, b = _pair(a, b)
        shape = a.shape[:-1]
        c0, c1, beta = self._sample(_flat(a), _flat(b), rng)
        return c0.reshape(shape), c1.reshape(shape), beta.reshape(shape)

    def _sample(self, a, b, rng):
        p = self._probabilities(a, b).reshape(-1, 8)
        u = rng.random(p.shape[0])
        return decode_outcomes(kernels.sample_categorical(np.ascontiguousarray(p), u))

    def fidelity_samples(self, a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Unbiased per-run estimates of the post-processing fidelity at inputs ``a``.

        Bob's setting is drawn uniformly for each run; since E[b b^T] = I/3,
        ``3 beta (R_c b).a`` has mean ``A_c(a).a`` whenever Bob's statistics are
        linear in ``b``.
        """
        b = sample_uniform_sphere(rng, a.shape[0])
        c0, c1, beta = self._sample(a, b, rng)
        rb = _FLAT_SIGNS[2 * c0 + c1] * b
        return 0.5 * (1.0 + 3.0 * beta * np.sum(rb * a, axis=1))

    def __str__(self) -> str:
        return self.identifier


class LinearModel(Protocol):
    """Protocols of the form P = (1 + beta V_c(a).b) / 8 with V_c = R_c m(a).

    ``teleported(a)`` returns ``m(a)``, the vector Bob would hold after an
    honest compensation.
    """

    def teleported(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _probabilities(self, a, b):
        m = np.ascontiguousarray(self.teleported(a))
        return kernels.linear_probabilities(m, np.ascontiguousarray(b))


@dataclass(frozen=True)
class Ideal(LinearModel):
    """Teleportation through a Werner-type resource: Bob holds lambda R_c a."""

    lam: float = 1.0
    kind: ClassVar[str] = "ideal"

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def identifier(self) -> str:
        return f"ideal:lambda={self.lam:.12g}"

    @property
    def parameters(self):
        return {"lambda": self.lam}

    def teleported(self, a):
        return self.lam * a


@dataclass(frozen=True)
class LowFidelity(LinearModel):
    """Teleports x and y perfectly and nothing else."""

    tol: float = 1e-9
    kind: ClassVar[str] = "lowfid"

    @property
    def parameters(self):
        return {"tol": self.tol}

    def teleported(self, a):
        near_x = np.linalg.norm(a - AXES[0], axis=-1) <= self.tol
        near_y = np.linalg.norm(a - AXES[1], axis=-1) <= self.tol
        return np.where((near_x | near_y)[..., None], a, 0.0)


@dataclass(frozen=True)
class PCrit(LinearModel):
    """Highest-fidelity assignment whose components never exceed ``wz``.

    With ``complementary=True`` the caps become axis dependent: ``wz`` on z
    and ``sqrt(2) - wz`` on x and y, and the map is the overlap-maximizing
    vector inside that box.
    """

    wz: float = INV_SQRT2
    complementary: bool = False
    kind: ClassVar[str] = "pcrit"

    def __post_init__(self) -> None:
        if not INV_SQRT3 < self.wz <= 1.0:
            raise ValueError(f"W_z must lie in (1/sqrt(3), 1], got {self.wz}")

    @property
    def identifier(self) -> str:
        tag = f"pcrit:wz={self.wz:.12g}"
        return tag + ",complementary=1" if self.complementary else tag

    @property
    def parameters(self):
        return {"wz": self.wz, "complementary": int(self.complementary)}

    @property
    def caps(self) -> np.ndarray:
        if self.complementary:
            other = SQRT2 - self.wz
            return np.array([other, other, self.wz])
        return np.full(3, self.wz)

    def teleported(self, a):
        a = np.ascontiguousarray(a)
        if self.complementary:
            return kernels.capped_map(a, self.caps)
        return kernels.pcrit_map(a, float(self.wz))


@dataclass(frozen=True)
class Gisin(Protocol):
    """Alice announces the sector of ``a``; Bob always holds t00."""

    kind: ClassVar[str] = "gisin"

    def _probabilities(self, a, b):
        k = sector_index(a)
        tb = b @ T00
        p = np.zeros((a.shape[0], 4, 2))
        rows = np.arange(a.shape[0])
        p[rows, k, 0] = np.maximum(0.0, 0.5 * (1.0 - tb))
        p[rows, k, 1] = np.maximum(0.0, 0.5 * (1.0 + tb))
        return p.reshape(-1, 2, 2, 2)


@dataclass(frozen=True)
class GisinHashed(Protocol):
    """Gisin with two shared random bits r: Alice sends sector xor r, Bob holds t_r."""

    kind: ClassVar[str] = "gisin-hashed"

    def _probabilities(self, a, b):
        k = sector_index(a)
        # Bob's vector given announced c is t_{c xor k}
        r = np.arange(4)[None, :] ^ k[:, None]
        tb = np.einsum("nrk,nk->nr", _FLAT_TETRA[r], b)
        p = np.empty((a.shape[0], 4, 2))
        p[:, :, 0] = np.maximum(0.0, 0.125 * (1.0 - tb))
        p[:, :, 1] = np.maximum(0.0, 0.125 * (1.0 + tb))
        return p.reshape(-1, 2, 2, 2)

    def _sample(self, a, b, rng):
        k = sector_index(a)
        r = rng.integers(0, 4, a.shape[0])
        c = k ^ r
        mean = np.sum(_FLAT_TETRA[r] * b, axis=1)
        beta = np.where(rng.random(a.shape[0]) < 0.5 * (1.0 + mean), 1, -1)
        return c >> 1, c & 1, beta


@dataclass(frozen=True)
class GisinFrameRandomized(Protocol):
    """Gisin in a tetrahedron frame drawn from the Haar measure on every run."""

    kind: ClassVar[str] = "gisin-frame"
    supports_exact: ClassVar[bool] = False

    def sample_with_hidden(self, a, b, rng):
        """Like ``sample`` but also returns Bob's hidden vector for each run."""
        a, b = _pair(a, b)
        shape = a.shape[:-1]
        c0, c1, beta, hidden = self._draw(_flat(a), _flat(b), rng)
        return c0.reshape(shape), c1.reshape(shape), beta.reshape(shape), hidden.reshape(shape + (3,))

    def _draw(self, a, b, rng):
        q = sample_unit_quaternions(rng, a.shape[0])
        u = rng.random(a.shape[0])
        return kernels.frame_gisin(a, b, q, u)

    def _sample(self, a, b, rng):
        c0, c1, beta, _ = self._draw(a, b, rng)
        return c0, c1, beta

    def fidelity_samples(self, a, rng):
        # per-run compensated hidden vector, no need to go through beta
        c0, c1, _, hidden = self._draw(a, np.broadcast_to(T00, a.shape).copy(), rng)
        comp = _FLAT_SIGNS[2 * c0 + c1] * hidden
        return 0.5 * (1.0 + np.sum(comp * a, axis=1))


@dataclass(frozen=True)
class TonerBaconActive(Protocol):
    """Two shared random vectors reproduce compensated teleportation exactly.

    Only meaningful with active compensation: Bob's box reads both bits
    before answering, so ``beta`` is already the compensated outcome.
    """

    kind: ClassVar[str] = "toner-bacon"
    supports_exact: ClassVar[bool] = False
    compensation: ClassVar[CompensationMode] = CompensationMode.ACTIVE

    def _sample(self, a, b, rng):
        n = a.shape[0]
        l1 = sample_uniform_sphere(rng, n)
        l2 = sample_uniform_sphere(rng, n)
        return kernels.toner_bacon(a, b, l1, l2)

    def fidelity_samples(self, a, rng):
        b = sample_uniform_sphere(rng, a.shape[0])
        _, _, beta = self._sample(a, b, rng)
        return 0.5 * (1.0 + 3.0 * beta * np.sum(b * a, axis=1))


# identifiers ------------------------------------------------------------

_REGISTRY: dict[str, type[Protocol]] = {
    "ideal": Ideal,
    "gisin": Gisin,
    "gisin-hashed": GisinHashed,
    "gisin-frame": GisinFrameRandomized,
    "lowfid": LowFidelity,
    "pcrit": PCrit,
    "toner-bacon": TonerBaconActive,
}

_PARAM_NAMES = {
    "ideal": {"lambda": "lam", "lam": "lam"},
    "lowfid": {"tol": "tol"},
    "pcrit": {"wz": "wz", "complementary": "complementary"},
}

_ID_RE = re.compile(r"^\s*([a-z\-]+)\s*(?::\s*(.*))?$")


def parse_protocol(text: str) -> Protocol:
    """Build a protocol from an identifier such as ``"ideal:lambda=0.8"``."""
    match = _ID_RE.match(text)
    if not match or match.group(1) not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown protocol {text!r} (known: {known})")
    name, params = match.group(1), match.group(2)
    kwargs: dict[str, object] = {}
    if params:
        allowed = _PARAM_NAMES.get(name, {})
        for item in params.split(","):
            if "=" not in item:
                raise ValueError(f"malformed parameter {item!r} in {text!r}")
            key, value = (s.strip() for s in item.split("=", 1))
            if key not in allowed:
                raise ValueError(f"protocol {name!r} takes no parameter {key!r}")
            target = allowed[key]
            kwargs[target] = bool(int(value)) if target == "complementary" else float(value)
    return _REGISTRY[name](**kwargs)


# single-setting conveniences ------------------------------------------------


def ideal_distribution(a, b, lam: float = 1.0) -> OutcomeDistribution:
    return Ideal(lam).distribution(a, b)


def gisin_distribution(a, b) -> OutcomeDistribution:
    return Gisin().distribution(a, b)


def gisin_hashed_distribution(a, b) -> OutcomeDistribution:
    return GisinHashed().distribution(a, b)


def gisin_frame_randomized_sample(a, b, rng) -> tuple[int, int, int]:
    c0, c1, beta = GisinFrameRandomized().sample(a, b, rng)
    return int(c0), int(c1), int(beta)


def lowfid_distribution(a, b, tol: float = 1e-9) -> OutcomeDistribution:
    return LowFidelity(tol).distribution(a, b)


def pcrit_map(a, wz: float = INV_SQRT2):
    """Cap the largest component of ``a`` at ``wz``, keeping the azimuth about that axis.

    Accepts a single vector (returns a ``BlochVector`` for ``BlochVector``
    input) or an ``(N, 3)`` batch.
    """
    if not INV_SQRT3 < wz <= 1.0:
        raise ValueError(f"W_z must lie in (1/sqrt(3), 1], got {wz}")
    arr = as_unit(a)
    out = kernels.pcrit_map(_flat(arr), float(wz)).reshape(arr.shape)
    if isinstance(a, BlochVector):
        return BlochVector.of(out)
    return out


def pcrit_distribution(a, b, wz: float = INV_SQRT2) -> OutcomeDistribution:
    return PCrit(wz).distribution(a, b)


def toner_bacon_active_sample(a, b, rng) -> tuple[int, int, int]:
    c0, c1, beta = TonerBaconActive().sample(a, b, rng)
    return int(c0), int(c1), int(beta)
