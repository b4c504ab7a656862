"""CHSH with the two-bit coarse-graining, fidelity estimators and the verdict.

Alice's two output bits are reduced to one sign per input: for input
``a_j`` the coarse-graining index picks ``c0`` (0), ``c1`` (1) or the parity
``c0 xor c1`` (2). Under the ideal statistics these read out the x, y and z
components of Alice's vector respectively.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .geometry import SIGNS, as_unit, from_angles, sample_uniform_sphere, to_angles
from .montecarlo import mean_estimate, resolve_seed
from .protocols import (
    SQRT2,
    CapabilityError,
    OutcomeDistribution,
    LinearModel,
    PCrit,
    Protocol,
)
from .stats import (
    AXIS_SETTINGS,
    LINEARITY_SETTINGS,
    CheckResult,
    ExperimentTable,
    MissingSettingError,
    check_alice_marginal,
    check_linearity_many,
    counts,
    ensure_separated,
    fit_conditional_vectors,
    require_separated,
)

CLASSICAL_BOUND = 2.0
GUARD_BAND = 1e-9
LAMBDA_CRIT = 1.0 / SQRT2
# benchmarks quoted in reports: stretched-vector model and consistency-only model
FIDELITY_BENCHMARKS = {
    "stretch": 0.5 * (1.0 + LAMBDA_CRIT),
    "consistency": 0.97718,
}

# alpha sign per (c0, c1) for each coarse-graining index
_ALPHA = np.array(
    [
        [[-1.0, -1.0], [1.0, 1.0]],  # 2 c0 - 1
        [[-1.0, 1.0], [-1.0, 1.0]],  # 2 c1 - 1
        [[-1.0, 1.0], [1.0, -1.0]],  # 2 (c0 xor c1) - 1
    ]
)


class Verdict(enum.Enum):
    QUANTUM_CERTIFIED = "QuantumCertified"
    INCONCLUSIVE = "Inconclusive"
    ASSUMPTION_VIOLATED = "AssumptionViolated"


@dataclass(frozen=True)
class ChshSettings:
    a0: np.ndarray
    a1: np.ndarray
    b0: np.ndarray
    b1: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a0", "a1", "b0", "b1"):
            v = as_unit(getattr(self, name))
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def canonical(cls) -> ChshSettings:
        x, y = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        return cls(x, y, (x + y) / SQRT2, (x - y) / SQRT2)

    @classmethod
    def from_dict(cls, d: dict) -> ChshSettings:
        return cls(*(np.asarray(d[k], dtype=float) for k in ("a0", "a1", "b0", "b1")))

    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Setting pairs in correlator order (00, 01, 10, 11)."""
        return [(self.a0, self.b0), (self.a0, self.b1), (self.a1, self.b0), (self.a1, self.b1)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("a0", "a1", "b0", "b1")}


@dataclass(frozen=True)
class ChshResult:
    value: float
    correlators: tuple[float, float, float, float]
    settings: ChshSettings
    coarse_graining: tuple[int, int] = (0, 1)

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    def violates(self) -> bool:
        return self.magnitude > CLASSICAL_BOUND + GUARD_BAND

    def to_dict(self) -> dict:
        e = self.correlators
        return {
            "value": self.value,
            "correlators": {"E00": e[0], "E01": e[1], "E10": e[2], "E11": e[3]},
            "settings": self.settings.to_dict(),
            "coarse_graining": list(self.coarse_graining),
        }


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    std_error: float
    sample_count: int
    mode: str

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n": self.sample_count, "mode": self.mode}


# correlators ----------------------------------------------------------------


def correlator(dist, j: int) -> float | np.ndarray:
    """E = sum of alpha * beta * P with alpha = 2 c_j - 1 (j = 2 uses the parity).

    Accepts an ``OutcomeDistribution`` or a probability array of shape
    ``(..., 2, 2, 2)``.
    """
    if j not in (0, 1, 2):
        raise ValueError(f"coarse-graining index must be 0, 1 or 2, got {j}")
    p = dist.probabilities if isinstance(dist, OutcomeDistribution) else np.asarray(dist, dtype=float)
    diff = p[..., 1] - p[..., 0]
    e = np.sum(_ALPHA[j] * diff, axis=(-2, -1))
    return float(e) if e.ndim == 0 else e


def _chsh_from_correlators(e) -> float:
    return e[0] + e[1] + e[2] - e[3]


def chsh(
    source,
    settings: ChshSettings | None = None,
    coarse_graining: tuple[int, int] = (0, 1),
    n_samples: int | None = None,
    rng=None,
) -> ChshResult:
    """CHSH = E00 + E01 + E10 - E11 from a protocol or an experiment table.

    Correlator ``E_jk`` uses coarse-graining ``coarse_graining[j]``. Exact
    protocols are evaluated exactly; sample-only protocols are simulated with
    ``n_samples`` runs per setting pair.
    """
    settings = settings or ChshSettings.canonical()
    pairs = settings.pairs()
    if isinstance(source, Protocol):
        if source.supports_exact:
            a = np.array([p[0] for p in pairs])
            b = np.array([p[1] for p in pairs])
            probs = source.probabilities(a, b)
        else:
            gen = np.random.default_rng(resolve_seed(rng))
            table = ExperimentTable.simulate(source, pairs, n_samples or 100_000, gen)
            return chsh(table, settings, coarse_graining)
    elif isinstance(source, ExperimentTable):
        probs = []
        for a, b in pairs:
            c = counts(source, a, b)
            if c.sum() == 0:
                raise MissingSettingError(f"table has no runs for setting pair a={a.tolist()}, b={b.tolist()}")
            probs.append(c / c.sum())
        probs = np.array(probs)
    else:
        raise TypeError(f"cannot evaluate CHSH on {type(source).__name__}")
    js = (coarse_graining[0], coarse_graining[0], coarse_graining[1], coarse_graining[1])
    e = tuple(float(correlator(probs[i], js[i])) for i in range(4))
    return ChshResult(float(_chsh_from_correlators(e)), e, settings, tuple(coarse_graining))


def chsh_values(protocol: Protocol, a0, a1, b0, b1, coarse_graining=(0, 1)) -> np.ndarray:
    """Vectorized signed CHSH for batches of settings, each of shape ``(M, 3)``."""
    a0, a1, b0, b1 = (np.asarray(v, dtype=float).reshape(-1, 3) for v in (a0, a1, b0, b1))
    a0, a1, b0, b1 = np.broadcast_arrays(a0, a1, b0, b1)
    a = np.stack([a0, a0, a1, a1])
    b = np.stack([b0, b1, b0, b1])
    p = protocol.probabilities(a, b)
    j0, j1 = coarse_graining
    e00, e01 = correlator(p[0], j0), correlator(p[1], j0)
    e10, e11 = correlator(p[2], j1), correlator(p[3], j1)
    return e00 + e01 + e10 - e11


# settings search -------------------------------------------------------------

GRID_THETA = 20
GRID_PHI = 40
STEP_START = 0.25
STEP_STOP = 1e-6


def _grid_angles() -> tuple[np.ndarray, np.ndarray]:
    theta = (np.arange(GRID_THETA) + 0.5) * math.pi / GRID_THETA
    phi = np.arange(GRID_PHI) * 2.0 * math.pi / GRID_PHI
    t, p = np.meshgrid(theta, phi, indexing="ij")
    return t.ravel(), p.ravel()


def _coordinate_ascent(objective, x: np.ndarray, start: float = STEP_START, stop: float = STEP_STOP):
    """Maximize ``objective`` (rows of ``x`` -> values) one coordinate at a time.

    Each row is an independent start. The step halves whenever no coordinate
    move improves any row; rows are updated in lockstep.
    """
    x = x.copy()
    best = objective(x)
    step = start
    while step >= stop:
        improved = False
        for i in range(x.shape[1]):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[:, i] += sign * step
                val = objective(trial)
                better = val > best + 1e-15
                if np.any(better):
                    improved = True
                    x[better] = trial[better]
                    best = np.where(better, val, best)
        if not improved:
            step *= 0.5
    return x, best


def _optimize_bob(protocol: Protocol, a0, a1, coarse_graining) -> tuple[ChshSettings, float]:
    """Best Bob settings for fixed Alice inputs.

    CHSH splits as f0(b0) + f1(b1) with f0 = E00 + E10 and f1 = E01 - E11,
    so each of Bob's vectors is searched on its own.
    """
    j0, j1 = coarse_graining

    def parts(theta, phi):
        b = from_angles(theta, phi)
        m = b.shape[0]
        a = np.concatenate([np.broadcast_to(a0, (m, 3)), np.broadcast_to(a1, (m, 3))])
        p = protocol.probabilities(a, np.concatenate([b, b]))
        e0, e1 = correlator(p[:m], j0), correlator(p[m:], j1)
        return e0 + e1, e0 - e1

    t, p = _grid_angles()
    f0, f1 = parts(t, p)
    results = []
    for sign in (1.0, -1.0):
        picks = []
        for k, f in enumerate((f0, f1)):
            i = int(np.argmax(sign * f))
            x0 = np.array([[t[i], p[i]]])
            x, v = _coordinate_ascent(lambda x, k=k: sign * parts(x[:, 0], x[:, 1])[k], x0)
            picks.append((from_angles(x[0, 0], x[0, 1]), float(v[0])))
        results.append((picks[0][1] + picks[1][1], picks[0][0], picks[1][0]))
    total, b0, b1 = max(results, key=lambda r: r[0])
    return ChshSettings(a0, a1, b0, b1), total


@dataclass(frozen=True)
class SearchResult:
    settings: ChshSettings
    value: float
    start_values: np.ndarray = field(repr=False)

    @property
    def starts(self) -> int:
        return int(self.start_values.size)


def search_settings(
    protocol: Protocol,
    n_starts: int = 256,
    rng=None,
    coarse_graining=(0, 1),
) -> SearchResult:
    """Multi-start search over all four vectors (8 angles) maximizing |CHSH|.

    Starts are uniform on the sphere for every vector; each is refined by
    coordinate ascent. Returns the best settings and every start's final
    |CHSH|.
    """
    if not protocol.supports_exact:
        raise CapabilityError(f"settings search needs exact statistics; {protocol.identifier!r} only samples")
    gen = np.random.default_rng(resolve_seed(rng))
    vecs = sample_uniform_sphere(gen, 4 * n_starts).reshape(4, n_starts, 3)
    angles = np.concatenate([np.stack(to_angles(v), axis=1) for v in vecs], axis=1)

    def objective(x):
        v = [from_angles(x[:, 2 * i], x[:, 2 * i + 1]) for i in range(4)]
        return np.abs(chsh_values(protocol, *v, coarse_graining=coarse_graining))

    x, vals = _coordinate_ascent(objective, angles)
    i = int(np.argmax(vals))
    best = ChshSettings(*(from_angles(x[i, 2 * k], x[i, 2 * k + 1]) for k in range(4)))
    return SearchResult(best, float(vals[i]), vals)


def optimize_settings(
    protocol: Protocol,
    strategy: str = "grid+refine",
    optimize_alice: bool = False,
    n_starts: int = 256,
    rng=None,
    coarse_graining=(0, 1),
    alice: tuple | None = None,
) -> ChshSettings:
    """Settings maximizing |CHSH|.

    ``canonical`` returns the fixed x/y settings. ``grid+refine`` keeps Alice
    at ``alice`` (default x and y) and searches Bob on a 20x40 angular grid
    followed by coordinate refinement; with ``optimize_alice`` the full
    multi-start search of ``search_settings`` runs as well and the better of
    the two is returned.
    """
    if strategy == "canonical":
        return ChshSettings.canonical()
    if strategy != "grid+refine":
        raise ValueError(f"unknown strategy {strategy!r}")
    if not protocol.supports_exact:
        raise CapabilityError(f"settings search needs exact statistics; {protocol.identifier!r} only samples")
    canon = ChshSettings.canonical()
    a0, a1 = (canon.a0, canon.a1) if alice is None else (as_unit(alice[0]), as_unit(alice[1]))
    best, value = _optimize_bob(protocol, a0, a1, coarse_graining)
    if optimize_alice:
        found = search_settings(protocol, n_starts, rng, coarse_graining)
        if found.value > abs(value):
            best = found.settings
    return best


# fidelity ----------------------------------------------------------------------

EXACT_MAP_NODES = (512, 1024)


def pointwise_fidelity(protocol: Protocol, a) -> np.ndarray:
    """Per-input fidelity sum_c P(c|a) (1 + A_c(a).a) / 2 from exact statistics.

    Bob's statistics are read at the three axis settings; for statistics
    linear in b, ``sum_beta beta P(c, beta | a, e_k) = P(c|a) V_c[k]``.
    """
    a = as_unit(np.asarray(a, dtype=float).reshape(-1, 3))
    if isinstance(protocol, LinearModel):
        # sum_c (R_c a).(R_c m) / 4 collapses to a.m
        return 0.5 + 0.5 * np.sum(a * protocol.teleported(a), axis=1)
    return _pointwise_from_statistics(protocol, a)


def _pointwise_from_statistics(protocol: Protocol, a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    axes = np.broadcast_to(np.eye(3)[None], (n, 3, 3))
    p = protocol.probabilities(np.broadcast_to(a[:, None, :], (n, 3, 3)), axes)
    w = p[..., 1] - p[..., 0]  # (n, axis, c0, c1)
    w = np.moveaxis(w, 1, -1)  # (n, c0, c1, axis)
    comp = np.sum(SIGNS[None] * w * a[:, None, None, :], axis=(1, 2, 3))
    return 0.5 + 0.5 * comp


def _exact_map_fidelity(protocol: Protocol, nodes=EXACT_MAP_NODES) -> FidelityEstimate:
    # Gauss-Legendre in z, uniform (periodic) rule in phi
    nz, nphi = nodes
    z, wz = np.polynomial.legendre.leggauss(nz)
    phi = (np.arange(nphi) + 0.5) * 2.0 * math.pi / nphi
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    r = np.sqrt(1.0 - zz * zz)
    a = np.stack([r * np.cos(pp), r * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    weights = (np.repeat(wz, nphi) / (2.0 * nphi)).reshape(nz, nphi)
    f = np.empty(a.shape[0])
    block = 1 << 16
    for s in range(0, a.shape[0], block):
        f[s : s + block] = pointwise_fidelity(protocol, a[s : s + block])
    value = float(np.sum(weights.ravel() * f) / np.sum(weights))
    return FidelityEstimate(value, 0.0, nz * nphi, "exact-map")


def average_fidelity(
    protocol: Protocol,
    n_samples: int | None = None,
    rng=None,
    mode: str | None = None,
    estimator: str = "auto",
) -> FidelityEstimate:
    """Sphere-averaged post-processing fidelity.

    ``mode="exact-map"`` integrates the exact per-input fidelity by
    quadrature. ``mode="monte-carlo"`` averages over ``n_samples`` uniform
    inputs; the per-input value is exact when the protocol has exact
    statistics (``estimator="auto"``) or a single sampled run otherwise
    (``estimator="runs"`` forces this for every protocol).
    """
    if mode is None:
        mode = "monte-carlo" if n_samples is not None or not protocol.supports_exact else "exact-map"
    if mode == "exact-map":
        if not protocol.supports_exact:
            raise CapabilityError(f"exact-map fidelity needs exact statistics; {protocol.identifier!r} only samples")
        return _exact_map_fidelity(protocol)
    if mode != "monte-carlo":
        raise ValueError(f"unknown fidelity mode {mode!r}")
    if estimator not in ("auto", "runs"):
        raise ValueError(f"unknown estimator {estimator!r}")
    n = 1_000_000 if n_samples is None else int(n_samples)
    seed = resolve_seed(rng)
    if protocol.supports_exact and estimator == "auto":
        def draw(g, m):
            return pointwise_fidelity(protocol, sample_uniform_sphere(g, m))
    else:
        def draw(g, m):
            return protocol.fidelity_samples(sample_uniform_sphere(g, m), g)
    est = mean_estimate(draw, n, seed)
    return FidelityEstimate(est.mean, est.std_error, est.count, "monte-carlo")


def table_fidelity(table: ExperimentTable, exclude: Iterable = (), b_settings=None) -> FidelityEstimate | None:
    """Average of the reconstructed per-input fidelity over the table's inputs.

    Inputs whose recorded settings do not span three dimensions are skipped,
    as are the inputs listed in ``exclude``. Returns ``None`` when nothing is
    left.
    """
    skip = {tuple(np.round(as_unit(e), 12) + 0.0) for e in exclude}
    values = []
    runs = 0
    for key in table.inputs():
        if key in skip:
            continue
        settings = np.array(b_settings if b_settings is not None else table.settings_for(key), dtype=float)
        if settings.shape[0] < 4 or np.linalg.matrix_rank(settings, tol=1e-9) < 3:
            continue
        est = fit_conditional_vectors(table, np.array(key), settings)
        values.append(est.fidelity())
        runs += int(table.rows_for_input(key).size)
    if not values:
        return None
    v = np.array(values)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return FidelityEstimate(float(v.mean()), se, runs, "table-fit")


# certification -----------------------------------------------------------------

ASSUMPTIONS = (
    "separated outputs: Bob's box never sees (c0, c1)",
    "Bob's statistics are linear in his setting b (checked)",
    "Alice's outcome marginal is uniform (checked)",
    "infinitely many runs; finite-sample loopholes are not analysed",
)


@dataclass(frozen=True)
class CertificationReport:
    chsh: ChshResult
    fidelity: FidelityEstimate | None
    marginal_check: CheckResult
    linearity_check: CheckResult
    verdict: Verdict
    seed: int
    protocol: str
    parameters: dict
    no_signaling_check: CheckResult | None = None

    def to_dict(self, timestamp: bool = True) -> dict:
        checks = {"marginal": self.marginal_check.to_dict(), "linearity": self.linearity_check.to_dict()}
        if self.no_signaling_check is not None:
            checks["no_signaling"] = self.no_signaling_check.to_dict()
        out = {
            "chsh": self.chsh.to_dict(),
            "fidelity": None if self.fidelity is None else self.fidelity.to_dict(),
            "checks": checks,
            "verdict": self.verdict.value,
            "seed": self.seed,
            "protocol": self.protocol,
            "parameters": self.parameters,
            "assumptions": list(ASSUMPTIONS),
            "fidelity_benchmarks": dict(FIDELITY_BENCHMARKS),
            "tool_version": __version__,
        }
        if timestamp:
            out["timestamp"] = datetime.now(timezone.utc).isoformat()
        return out

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2, sort_keys=True)


def decide(chsh_result: ChshResult, checks: Sequence[CheckResult]) -> Verdict:
    if not all(c.passed for c in checks):
        return Verdict.ASSUMPTION_VIOLATED
    if chsh_result.violates():
        return Verdict.QUANTUM_CERTIFIED
    return Verdict.INCONCLUSIVE


PROBE_INPUTS = 32
DEFAULT_RUNS = 100_000


def probe_inputs(settings: ChshSettings, rng: np.random.Generator, extra: int = PROBE_INPUTS) -> np.ndarray:
    """Alice inputs used for the assumption checks: the CHSH inputs plus random ones."""
    return np.concatenate([settings.a0[None], settings.a1[None], sample_uniform_sphere(rng, extra)])


def exact_checks(protocol: Protocol, settings: ChshSettings, rng: np.random.Generator) -> tuple[CheckResult, CheckResult]:
    inputs = probe_inputs(settings, rng)
    dists = [protocol.distribution(a, b) for a, b in settings.pairs()]
    for a in inputs:
        p = protocol.probabilities(np.broadcast_to(a, LINEARITY_SETTINGS.shape), LINEARITY_SETTINGS)
        dists.extend(OutcomeDistribution(x) for x in p)
    marginal = check_alice_marginal(dists)
    linearity = check_linearity_many([fit_conditional_vectors(protocol, a, LINEARITY_SETTINGS) for a in inputs])
    return marginal, linearity


def table_checks(table: ExperimentTable, settings: ChshSettings) -> tuple[CheckResult, CheckResult]:
    marginal = check_alice_marginal(table)
    estimates = []
    for key in table.inputs():
        s = np.array(table.settings_for(key))
        if s.shape[0] >= 6 and np.linalg.matrix_rank(s, tol=1e-9) == 3:
            estimates.append(fit_conditional_vectors(table, np.array(key), s))
    if not estimates:
        raise MissingSettingError("no Alice input has enough Bob settings (>= 6, spanning) for the linearity check")
    return marginal, check_linearity_many(estimates)


def simulate_certification_table(
    protocol: Protocol, settings: ChshSettings, runs: int, rng: np.random.Generator
) -> ExperimentTable:
    """CHSH block plus a linearity probe of both CHSH inputs at 14 settings."""
    pairs = settings.pairs()
    for a in (settings.a0, settings.a1):
        pairs.extend((a, b) for b in LINEARITY_SETTINGS)
    return ExperimentTable.simulate(protocol, pairs, runs, rng)


def certify(
    source,
    settings: ChshSettings | None = None,
    n_samples: int | None = None,
    rng=None,
) -> CertificationReport:
    """Run the checks, CHSH and fidelity on a protocol or a table and give a verdict.

    For a protocol without exact statistics a table is simulated with
    ``n_samples`` runs per setting pair (default 1e5) and certified like
    measured data; its fidelity still comes from the protocol's own
    per-run estimator.
    """
    settings = settings or ChshSettings.canonical()
    seed = resolve_seed(rng)
    streams = np.random.SeedSequence(seed).spawn(3)
    no_signaling = None
    if isinstance(source, Protocol):
        ensure_separated(source)
        name, params = source.identifier, dict(source.parameters)
        if source.supports_exact:
            result = chsh(source, settings)
            marginal, linearity = exact_checks(source, settings, np.random.default_rng(streams[0]))
            fid = average_fidelity(source, n_samples, streams[1].generate_state(1)[0])
        else:
            table = simulate_certification_table(
                source, settings, n_samples or DEFAULT_RUNS, np.random.default_rng(streams[0])
            )
            no_signaling = require_separated(table)
            result = chsh(table, settings)
            marginal, linearity = table_checks(table, settings)
            fid = average_fidelity(source, n_samples or 1_000_000, int(streams[1].generate_state(1)[0]))
    elif isinstance(source, ExperimentTable):
        name, params = "table", {"runs": len(source)}
        no_signaling = require_separated(source)
        result = chsh(source, settings)
        marginal, linearity = table_checks(source, settings)
        fid = table_fidelity(source, exclude=(settings.a0, settings.a1))
    else:
        raise TypeError(f"cannot certify {type(source).__name__}")
    verdict = decide(result, (marginal, linearity))
    return CertificationReport(result, fid, marginal, linearity, verdict, seed, name, params, no_signaling)


# W_z sweep ---------------------------------------------------------------------

# Alice axis pairs and the coarse-graining that reads out each axis
CANONICAL_FAMILY = (
    ((0, 1), (0, 1)),
    ((0, 2), (0, 2)),
    ((1, 2), (1, 2)),
)


def canonical_family() -> list[tuple[ChshSettings, tuple[int, int]]]:
    """x/y, x/z and y/z versions of the canonical settings."""
    eye = np.eye(3)
    out = []
    for (i, k), cg in CANONICAL_FAMILY:
        u, v = eye[i], eye[k]
        out.append((ChshSettings(u, v, (u + v) / SQRT2, (u - v) / SQRT2), cg))
    return out


@dataclass(frozen=True)
class SweepRow:
    wz: float
    max_chsh: float
    max_chsh_optimal: float
    fidelity: float
    std_error: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.wz, self.max_chsh, self.max_chsh_optimal, self.fidelity, self.std_error)


SWEEP_HEADER = ("wz", "max_chsh", "max_chsh_optimal", "fidelity", "std_error")


def wz_sweep(wz_values: Sequence[float], n_samples: int | None = None, rng=None) -> list[SweepRow]:
    """Fidelity and CHSH of the capped protocol with complementary x/y caps.

    ``max_chsh`` is the largest |CHSH| over the canonical family;
    ``max_chsh_optimal`` keeps the family's Alice inputs but optimizes Bob.
    Fidelity is exact-map unless ``n_samples`` is given.
    """
    seed = resolve_seed(rng) if n_samples is not None else 0
    rows = []
    for wz in wz_values:
        proto = PCrit(float(wz), complementary=True)
        canon = max(abs(chsh(proto, s, cg).value) for s, cg in canonical_family())
        optimal = max(
            abs(_optimize_bob(proto, s.a0, s.a1, cg)[1]) for s, cg in canonical_family()
        )
        fid = average_fidelity(proto, n_samples, seed)
        rows.append(SweepRow(float(wz), canon, optimal, fid.value, fid.std_error))
    return rows


def best_admissible(rows: Sequence[SweepRow], column: str = "max_chsh") -> SweepRow | None:
    """Highest-fidelity row whose CHSH column stays within the classical bound."""
    ok = [r for r in rows if getattr(r, column) <= CLASSICAL_BOUND + GUARD_BAND]
    return max(ok, key=lambda r: r.fidelity) if ok else None
