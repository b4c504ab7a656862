"""Experiment tables and the checks that can be run on observed statistics.

A table is one row per run: ``(a, b, c0, c1, beta)``. Runs are grouped by
setting pair after rounding coordinates to 12 decimals, which is how
synthetic tables with repeated settings are meant to be read back.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import AXES, SIGNS, as_unit
from .protocols import CompensationMode, OutcomeDistribution, Protocol

HEADER = ("ax", "ay", "az", "bx", "by", "bz", "c0", "c1", "beta")
INGEST_TOL = 1e-9
KEY_DECIMALS = 12

# six axis settings +-x, +-y, +-z
AXIS_SETTINGS = np.concatenate([AXES, -AXES])
# axes plus the eight cube diagonals; odd nonlinearities show up here
LINEARITY_SETTINGS = np.concatenate(
    [
        AXIS_SETTINGS,
        np.array([[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]) / math.sqrt(3.0),
    ]
)

EXACT_LINEARITY_THRESHOLD = 1e-9
SAMPLED_LINEARITY_THRESHOLD = 0.05


class MissingSettingError(LookupError):
    """No runs were recorded for a requested setting pair."""


class CsvFormatError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def setting_key(v) -> tuple[float, float, float]:
    r = np.round(np.asarray(v, dtype=float), KEY_DECIMALS) + 0.0
    return (float(r[0]), float(r[1]), float(r[2]))


@dataclass(frozen=True, eq=False)
class ExperimentTable:
    """Immutable run table with a lazily built (a, b) grouping index."""

    a: np.ndarray
    b: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float).reshape(-1, 3)
        b = np.asarray(self.b, dtype=float).reshape(-1, 3)
        c0 = np.asarray(self.c0, dtype=np.int8).reshape(-1)
        c1 = np.asarray(self.c1, dtype=np.int8).reshape(-1)
        beta = np.asarray(self.beta, dtype=np.int8).reshape(-1)
        n = a.shape[0]
        if not (b.shape[0] == c0.size == c1.size == beta.size == n):
            raise ValueError("table columns have different lengths")
        if n:
            a = as_unit(a, INGEST_TOL)
            b = as_unit(b, INGEST_TOL)
        if np.any((c0 != 0) & (c0 != 1)) or np.any((c1 != 0) & (c1 != 1)):
            raise ValueError("c0 and c1 must be bits")
        if np.any((beta != 1) & (beta != -1)):
            raise ValueError("beta must be +1 or -1")
        for name, arr in zip(("a", "b", "c0", "c1", "beta"), (a, b, c0, c1, beta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls) -> ExperimentTable:
        z = np.zeros(0)
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), z, z, z)

    @classmethod
    def concat(cls, tables: Iterable[ExperimentTable]) -> ExperimentTable:
        tables = list(tables)
        if not tables:
            return cls.empty()
        return cls(
            np.concatenate([t.a for t in tables]),
            np.concatenate([t.b for t in tables]),
            np.concatenate([t.c0 for t in tables]),
            np.concatenate([t.c1 for t in tables]),
            np.concatenate([t.beta for t in tables]),
        )

    @classmethod
    def simulate(
        cls,
        protocol: Protocol,
        pairs: Sequence[tuple[np.ndarray, np.ndarray]],
        runs: int,
        rng: np.random.Generator,
    ) -> ExperimentTable:
        """``runs`` sampled runs of ``protocol`` for every ``(a, b)`` in ``pairs``."""
        if not pairs:
            return cls.empty()
        a = np.repeat(np.array([as_unit(p[0]) for p in pairs]), runs, axis=0)
        b = np.repeat(np.array([as_unit(p[1]) for p in pairs]), runs, axis=0)
        c0, c1, beta = protocol.sample(a, b, rng)
        return cls(a, b, c0, c1, beta)

    def __len__(self) -> int:
        return self.a.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentTable):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("a", "b", "c0", "c1", "beta")
        )

    @cached_property
    def _index(self) -> dict[tuple, np.ndarray]:
        if len(self) == 0:
            return {}
        rows = np.round(np.concatenate([self.a, self.b], axis=1), KEY_DECIMALS) + 0.0
        uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(uniq.shape[0] + 1))
        return {
            (tuple(u[:3].tolist()), tuple(u[3:].tolist())): order[bounds[i] : bounds[i + 1]]
            for i, u in enumerate(uniq)
        }

    @cached_property
    def _a_index(self) -> dict[tuple, np.ndarray]:
        if len(self) == 0:
            return {}
        rows = np.round(self.a, KEY_DECIMALS) + 0.0
        uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(uniq.shape[0] + 1))
        return {tuple(u.tolist()): order[bounds[i] : bounds[i + 1]] for i, u in enumerate(uniq)}

    def settings(self) -> list[tuple[tuple, tuple]]:
        return list(self._index)

    def inputs(self) -> list[tuple]:
        return list(self._a_index)

    def settings_for(self, a) -> list[tuple]:
        """Bob settings recorded together with Alice input ``a``."""
        key = setting_key(a)
        return [bk for ak, bk in self._index if ak == key]

    def rows(self, a, b) -> np.ndarray:
        return self._index.get((setting_key(a), setting_key(b)), np.zeros(0, dtype=np.int64))

    def rows_for_input(self, a) -> np.ndarray:
        return self._a_index.get(setting_key(a), np.zeros(0, dtype=np.int64))

    def outcome_index(self, rows=None) -> np.ndarray:
        sel = slice(None) if rows is None else rows
        return 4 * self.c0[sel].astype(np.int64) + 2 * self.c1[sel] + (self.beta[sel] + 1) // 2

    def with_beta_flipped(self) -> ExperimentTable:
        return ExperimentTable(self.a, self.b, self.c0, self.c1, -self.beta.astype(np.int64))


# distributions ------------------------------------------------------------


def counts(table: ExperimentTable, a, b) -> np.ndarray:
    rows = table.rows(a, b)
    return np.bincount(table.outcome_index(rows), minlength=8).reshape(2, 2, 2)


def empirical_distribution(table: ExperimentTable, a, b) -> OutcomeDistribution:
    c = counts(table, a, b)
    n = int(c.sum())
    if n == 0:
        raise MissingSettingError(f"no runs recorded for a={setting_key(a)}, b={setting_key(b)}")
    return OutcomeDistribution(c / n)


# conditional vectors --------------------------------------------------------


@dataclass(frozen=True)
class ConditionalVector:
    """Bob's reconstructed vector for one announced ``(c0, c1)``.

    ``V`` is what Bob's box holds before correction, ``A = R_c V`` after.
    ``count`` is the number of runs behind the estimate, or ``None`` for
    exact input.
    """

    c0: int
    c1: int
    V: np.ndarray
    A: np.ndarray
    residual: float
    probability: float
    count: int | None

    @property
    def estimable(self) -> bool:
        return bool(np.all(np.isfinite(self.V)))


@dataclass(frozen=True)
class ConditionalVectorEstimate:
    a: np.ndarray
    settings: np.ndarray
    vectors: dict[tuple[int, int], ConditionalVector]
    exact: bool

    @property
    def residual(self) -> float:
        res = [v.residual for v in self.vectors.values() if v.estimable]
        return max(res) if res else 0.0

    def fidelity(self) -> float:
        """Sum over outcomes of P(c|a) (1 + A_c.a) / 2."""
        total = 0.0
        for v in self.vectors.values():
            if v.probability > 0.0 and v.estimable:
                total += v.probability * 0.5 * (1.0 + float(v.A @ self.a))
        return total


def _distributions(source, a, settings) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(source, ExperimentTable):
        c = np.stack([counts(source, a, b) for b in settings]).astype(float)
        n = c.sum(axis=(1, 2, 3))
        if np.any(n == 0):
            missing = settings[int(np.flatnonzero(n == 0)[0])]
            raise MissingSettingError(f"no runs recorded for a={setting_key(a)}, b={setting_key(missing)}")
        return c / n[:, None, None, None], c
    if isinstance(source, Protocol):
        return source.probabilities(np.broadcast_to(a, settings.shape), settings), None
    raise TypeError(f"cannot read statistics from {type(source).__name__}")


def fit_conditional_vectors(source, a, b_settings=AXIS_SETTINGS) -> ConditionalVectorEstimate:
    """Least-squares fit of <beta | c, a, b> = V_c . b over Bob's settings.

    ``source`` is an ``ExperimentTable`` or a protocol with exact statistics.
    """
    raw_a = np.asarray(a, dtype=float)
    raw_b = np.asarray(b_settings, dtype=float).reshape(-1, 3)
    a = as_unit(raw_a, INGEST_TOL)
    settings = as_unit(raw_b, INGEST_TOL)
    if settings.shape[0] < 4 or np.linalg.matrix_rank(settings, tol=1e-9) < 3:
        raise ValueError("b-settings do not span the sphere")
    # table lookups use the vectors as given: renormalizing a rounded key can move it to another key
    if isinstance(source, ExperimentTable):
        probs, cnt = _distributions(source, raw_a, raw_b)
    else:
        probs, cnt = _distributions(source, a, settings)
    vectors = {}
    for c0 in (0, 1):
        for c1 in (0, 1):
            cell = probs[:, c0, c1, :]
            pc = cell.sum(axis=1)
            have = pc > 0.0
            count = None if cnt is None else int(cnt[:, c0, c1, :].sum())
            if have.sum() < 3 or np.linalg.matrix_rank(settings[have], tol=1e-9) < 3:
                nan = np.full(3, np.nan)
                vectors[(c0, c1)] = ConditionalVector(c0, c1, nan, nan, 0.0, float(pc.mean()), count)
                continue
            mean = (cell[have, 1] - cell[have, 0]) / pc[have]
            B = settings[have]
            V, *_ = np.linalg.lstsq(B, mean, rcond=None)
            resid = float(np.sqrt(np.mean((B @ V - mean) ** 2)))
            A = SIGNS[c0, c1] * V
            vectors[(c0, c1)] = ConditionalVector(c0, c1, V, A, resid, float(pc.mean()), count)
    return ConditionalVectorEstimate(a, settings, vectors, exact=cnt is None)


# assumption checks --------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    statistic: float
    threshold: float
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "statistic", float(self.statistic))
        object.__setattr__(self, "threshold", float(self.threshold))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "statistic": self.statistic,
            "threshold": self.threshold,
            **self.details,
        }


def sampled_threshold(estimate: ConditionalVectorEstimate) -> float:
    """0.05, widened to three per-setting standard errors for small samples.

    A cell seen ``n`` times per setting has <beta> noise of at most
    1/sqrt(n), and the rms misfit of pure noise sits just below that.
    """
    per_setting = [
        v.count / estimate.settings.shape[0]
        for v in estimate.vectors.values()
        if v.estimable and v.count
    ]
    if not per_setting:
        return SAMPLED_LINEARITY_THRESHOLD
    return max(SAMPLED_LINEARITY_THRESHOLD, 3.0 / math.sqrt(min(per_setting)))


def check_linearity(estimate: ConditionalVectorEstimate, threshold: float | None = None) -> CheckResult:
    """Pass iff every cell's rms misfit of the linear model is within ``threshold``."""
    if threshold is None:
        threshold = EXACT_LINEARITY_THRESHOLD if estimate.exact else sampled_threshold(estimate)
    residual = estimate.residual
    return CheckResult(
        "linearity",
        residual <= threshold,
        residual,
        threshold,
        {"settings": int(estimate.settings.shape[0])},
    )


def check_linearity_many(estimates: Sequence[ConditionalVectorEstimate], threshold: float | None = None) -> CheckResult:
    results = [check_linearity(e, threshold) for e in estimates]
    worst = max(results, key=lambda r: r.statistic - r.threshold)
    return CheckResult(
        "linearity",
        all(r.passed for r in results),
        worst.statistic,
        worst.threshold,
        {"inputs": len(results), "settings": worst.details["settings"]},
    )


def check_alice_marginal(source, tolerance: float | None = None) -> CheckResult:
    """Pass iff every P(c0, c1 | a) is within ``tolerance`` of 1/4.

    ``source`` is an ``OutcomeDistribution``, a sequence of them, or an
    ``ExperimentTable`` (checked per Alice input). For tables the default
    tolerance is five binomial standard errors of the smallest input group;
    for exact distributions it is 1e-12.
    """
    if isinstance(source, ExperimentTable):
        marginals = []
        sizes = []
        for key in source.inputs():
            rows = source.rows_for_input(key)
            cells = np.bincount(2 * source.c0[rows].astype(np.int64) + source.c1[rows], minlength=4)
            marginals.append(cells.reshape(2, 2) / rows.size)
            sizes.append(rows.size)
        if not marginals:
            return CheckResult("marginal", True, 0.0, 0.0 if tolerance is None else tolerance, {"inputs": 0})
        if tolerance is None:
            tolerance = 5.0 * math.sqrt(0.25 * 0.75 / min(sizes))
        marginals = np.array(marginals)
    else:
        dists = [source] if isinstance(source, OutcomeDistribution) else list(source)
        marginals = np.array([d.alice_marginal() for d in dists])
        if tolerance is None:
            tolerance = 1e-12
    deviations = np.abs(marginals - 0.25)
    worst = float(deviations.max())
    return CheckResult(
        "marginal",
        worst <= tolerance,
        worst,
        float(tolerance),
        {"inputs": int(marginals.shape[0]), "deviations": deviations.tolist()},
    )


def check_no_signaling(table: ExperimentTable, sigma: float = 5.0, min_runs: int = 30) -> CheckResult:
    """Bob's marginal <beta | a, b> must not depend on Alice's input.

    In the separated scenario Bob's box never sees the two bits, so a
    dependence on ``a`` means the bits were fed into Bob's box (active
    compensation) or the boxes communicate. Each input group is compared
    with the pooled runs of the other inputs at the same setting.
    """
    by_b: dict[tuple, list[np.ndarray]] = {}
    for (ak, bk), rows in table._index.items():
        if rows.size >= min_runs:
            by_b.setdefault(bk, []).append(rows)
    worst = 0.0
    for groups in by_b.values():
        if len(groups) < 2:
            continue
        sums = np.array([float(table.beta[r].sum()) for r in groups])
        sq = np.array([float(r.size) for r in groups])  # beta^2 = 1
        n = np.array([r.size for r in groups], dtype=float)
        total, total_n = sums.sum(), n.sum()
        for i in range(len(groups)):
            m_i = sums[i] / n[i]
            rest_n = total_n - n[i]
            m_r = (total - sums[i]) / rest_n
            v_i = max(sq[i] / n[i] - m_i * m_i, 1e-12) / n[i]
            v_r = max(1.0 - m_r * m_r, 1e-12) / rest_n
            worst = max(worst, abs(m_i - m_r) / math.sqrt(v_i + v_r))
    return CheckResult("no-signaling", worst <= sigma, worst, sigma)


# CSV ----------------------------------------------------------------------


def ingest_csv(path) -> ExperimentTable:
    """Read a run table. An empty file gives an empty table."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return ExperimentTable.empty()
    reader = csv.reader(text.splitlines())
    rows_a, rows_b, c0s, c1s, betas = [], [], [], [], []
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1:
            if tuple(h.strip() for h in row) != HEADER:
                raise CsvFormatError(1, f"expected header {','.join(HEADER)!r}")
            continue
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(HEADER):
            raise CsvFormatError(lineno, f"expected {len(HEADER)} fields, got {len(row)}")
        try:
            ax, ay, az, bx, by, bz = (float(x) for x in row[:6])
            c0, c1, beta = (int(x) for x in row[6:])
        except ValueError as exc:
            raise CsvFormatError(lineno, str(exc)) from None
        if c0 not in (0, 1) or c1 not in (0, 1) or beta not in (-1, 1):
            raise CsvFormatError(lineno, "c0, c1 must be bits and beta must be +1 or -1")
        for name, v in (("a", (ax, ay, az)), ("b", (bx, by, bz))):
            norm = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            if abs(norm - 1.0) > INGEST_TOL:
                raise CsvFormatError(lineno, f"{name} is not a unit vector (norm {norm!r})")
        rows_a.append((ax, ay, az))
        rows_b.append((bx, by, bz))
        c0s.append(c0)
        c1s.append(c1)
        betas.append(beta)
    if not rows_a:
        return ExperimentTable.empty()
    return ExperimentTable(np.array(rows_a), np.array(rows_b), c0s, c1s, betas)


def export_csv(table: ExperimentTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(HEADER) + "\n")
        for i in range(len(table)):
            coords = ",".join(repr(float(x)) for x in (*table.a[i], *table.b[i]))
            fh.write(f"{coords},{int(table.c0[i])},{int(table.c1[i])},{int(table.beta[i])}\n")


def require_separated(table: ExperimentTable) -> CheckResult:
    """Raise when Bob's marginals reveal that his box read Alice's bits."""
    check = check_no_signaling(table)
    if not check.passed:
        raise ActiveCompensationError(
            "active-compensation data cannot be certified in separated mode "
            f"(Bob's marginal depends on Alice's input at {check.statistic:.1f} sigma)"
        )
    return check


class ActiveCompensationError(ValueError):
    """Statistics only a box pair with active compensation could produce."""


def ensure_separated(protocol: Protocol) -> None:
    if protocol.compensation is CompensationMode.ACTIVE:
        raise ActiveCompensationError(
            f"active-compensation data cannot be certified in separated mode ({protocol.identifier})"
        )
