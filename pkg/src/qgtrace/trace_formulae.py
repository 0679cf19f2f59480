"""Trace-formula residuals, the log-det asymptotics behind them, and the isospectrality gate.

For two couplings of the same type on one graph the ratio of secular
determinants at ``lambda = -tau^2`` has an asymptotic series in ``1/tau``
whose coefficients are explicit vertex sums.  Isospectral couplings make the
ratio identically one, so every coefficient ``T_m`` must vanish; a single
nonzero ``T_m`` certifies that the spectra differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidCouplingError, NonInvertibleCouplingError, NumericalError
from .graph_core import MetricGraph, require_valid, vertex_valences
from .mfunction import SpectralPoint, eval_m
from .secular import CouplingSet, default_lower_bound

DELTA_PRIME_TRACE_VARIANTS = ("expansion", "printed")
ZERO_TOL = 1e-12
DEFAULT_TAU_GRID = tuple(np.geomspace(40.0, 200.0, 16))

CERTIFIED_DISTINCT = "CERTIFIED_DISTINCT"
INCONCLUSIVE = "INCONCLUSIVE"


def _pair(g: MetricGraph, B1: CouplingSet, B2: CouplingSet) -> str:
    B1.check_against(g)
    B2.check_against(g)
    if B1.coupling_type != B2.coupling_type:
        raise InvalidCouplingError("the two couplings have different matching types")
    return B1.coupling_type


def _require_type(kind: str, expected: str) -> None:
    if kind != expected:
        raise InvalidCouplingError(f"expected {expected} couplings, got {kind}")


def _require_invertible(*couplings: CouplingSet) -> None:
    for c in couplings:
        if not c.invertible:
            raise NonInvertibleCouplingError("delta-prime trace formulae need every coupling constant nonzero")


def _exact(values) -> list[Fraction]:
    return [Fraction(float(v)) for v in values]


def _delta_terms(g, B1, B2, m):
    gamma = [int(x) for x in vertex_valences(g)]
    a1, a2 = _exact(B1.alpha), _exact(B2.alpha)
    d = [x - y for x, y in zip(a1, a2)]
    total = Fraction(0)
    for j in range(1, m + 1):
        c = Fraction(comb(m - 1, m - j), j)
        total += c * sum(dv**j * bv ** (m - j) / Fraction(gv) ** m for dv, bv, gv in zip(d, a2, gamma))
    return total


def _delta_prime_terms(g, B1, B2, m, variant):
    gamma = [int(x) for x in vertex_valences(g)]
    inv1 = [1 / x for x in _exact(B1.alpha)]
    inv2 = [1 / x for x in _exact(B2.alpha)]
    d = [y - x for x, y in zip(inv1, inv2)]
    total = Fraction(0)
    for j in range(1, m + 1):
        c = Fraction(comb(m - 1, m - j), j)
        if variant == "expansion":
            c *= (-1) ** j
            power = m
        else:
            power = j + m
        total += c * sum(dv**j * iv ** (m - j) * Fraction(gv) ** power for dv, iv, gv in zip(d, inv2, gamma))
    return total


def trace_residual_delta(g: MetricGraph, B1: CouplingSet, B2: CouplingSet, m: int) -> float:
    """``T_m = sum_j (1/j) C(m-1, m-j) Tr(D^j B2^(m-j) Gamma^-m)`` with ``D = B1 - B2``.

    The sum is carried out exactly on the binary values of the couplings, so
    residuals that vanish algebraically come out as exact zeros.
    """
    require_valid(g)
    _require_type(_pair(g, B1, B2), "delta")
    if m < 1:
        raise ValueError("order m must be at least 1")
    return float(_delta_terms(g, B1, B2, m))


def trace_residual_delta_prime(
    g: MetricGraph, B1: CouplingSet, B2: CouplingSet, m: int, variant: str = "expansion"
) -> float:
    """delta-prime residual with ``D = B2^-1 - B1^-1``.

    ``variant="expansion"``: ``sum_j ((-1)^j / j) C(m-1, m-j) Tr(D^j B2^-(m-j) Gamma^m)``,
    the form that reproduces the log-det asymptotics.
    ``variant="printed"``: ``sum_j (1/j) C(m-1, m-j) Tr(D^j B2^-(m-j) Gamma^(j+m))``.
    """
    require_valid(g)
    _require_type(_pair(g, B1, B2), "delta_prime")
    _require_invertible(B1, B2)
    if m < 1:
        raise ValueError("order m must be at least 1")
    if variant not in DELTA_PRIME_TRACE_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    return float(_delta_prime_terms(g, B1, B2, m, variant))


def trace_residual(g, B1, B2, m, variant: str = "expansion") -> float:
    if B1.coupling_type == "delta":
        return trace_residual_delta(g, B1, B2, m)
    return trace_residual_delta_prime(g, B1, B2, m, variant)


def residual_scale(g: MetricGraph, B1: CouplingSet, B2: CouplingSet, m: int) -> float:
    """``(1 + |B1| + |B2|)^m |Gamma^(-+m)|`` in max norms (inverses for delta-prime)."""
    gamma = vertex_valences(g).astype(float)
    if B1.coupling_type == "delta":
        b = 1.0 + max(map(abs, B1.alpha)) + max(map(abs, B2.alpha))
        return b**m * float(np.max(gamma ** (-m)))
    b = 1.0 + max(abs(1.0 / a) for a in B1.alpha) + max(abs(1.0 / a) for a in B2.alpha)
    return b**m * float(np.max(gamma**m))


@dataclass(frozen=True)
class TraceReport:
    coupling_type: str
    B1: CouplingSet
    B2: CouplingSet
    D: tuple[float, ...]
    residuals: tuple[float, ...]
    valences: tuple[int, ...]
    scales: tuple[float, ...]
    variant: Optional[str] = None

    def vanishing(self, tol: float = ZERO_TOL) -> tuple[bool, ...]:
        return tuple(abs(t) <= tol * s for t, s in zip(self.residuals, self.scales))


def trace_report(
    g: MetricGraph, B1: CouplingSet, B2: CouplingSet, orders: int, variant: str = "expansion"
) -> TraceReport:
    kind = _pair(g, B1, B2)
    if kind == "delta":
        D = tuple(a - b for a, b in zip(B1.alpha, B2.alpha))
        res = tuple(trace_residual_delta(g, B1, B2, m) for m in range(1, orders + 1))
        variant = None
    else:
        _require_invertible(B1, B2)
        D = tuple(1.0 / b - 1.0 / a for a, b in zip(B1.alpha, B2.alpha))
        res = tuple(trace_residual_delta_prime(g, B1, B2, m, variant) for m in range(1, orders + 1))
    scales = tuple(residual_scale(g, B1, B2, m) for m in range(1, orders + 1))
    return TraceReport(kind, B1, B2, D, res, tuple(int(x) for x in vertex_valences(g)), scales, variant)


# ---------------------------------------------------------------------------
# log-det asymptotics
# ---------------------------------------------------------------------------


def _log_det_identity_plus(X: np.ndarray) -> float:
    # log det(I + X) for small X without forming the determinant
    ev = np.linalg.eigvals(X)
    if np.any(np.abs(1.0 + ev) < 1e-14):
        raise NumericalError("log-det ratio is singular at this sample point")
    return float(np.sum(np.log1p(ev)).real)


def logdet_ratio(g: MetricGraph, B1: CouplingSet, B2: CouplingSet, tau: float) -> float:
    """Log of the secular determinant ratio at ``lambda = -tau^2``.

    delta: ``log det[(B1 - M)(B2 - M)^-1] = log det(I + D (B2 - M)^-1)``.
    delta': ``log det[(I - B1^-1 M)(I - B2^-1 M)^-1] = log det(I + D M (I - B2^-1 M)^-1)``.
    """
    require_valid(g)
    kind = _pair(g, B1, B2)
    tau = float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    if kind == "delta_prime":
        _require_invertible(B1, B2)
    floor = min(default_lower_bound(g, B1), default_lower_bound(g, B2))
    if -tau * tau > floor:
        raise NumericalError(f"tau = {tau:g} is too small: -tau^2 is not below the spectral floor {floor:.6g}")
    M = eval_m(g, SpectralPoint.from_lambda(-tau * tau), kind).entries.real
    if kind == "delta":
        D = np.diag(np.subtract(B1.alpha, B2.alpha))
        X = D @ np.linalg.inv(B2.B - M)
    else:
        inv1 = 1.0 / np.asarray(B1.alpha)
        inv2 = 1.0 / np.asarray(B2.alpha)
        D = np.diag(inv2 - inv1)
        X = D @ M @ np.linalg.inv(np.eye(g.vertex_count) - inv2[:, None] * M)
    return _log_det_identity_plus(X)


def _series_ratio(g, B1, B2) -> float:
    gamma = vertex_valences(g).astype(float)
    if B1.coupling_type == "delta":
        a = np.abs(np.concatenate([B1.alpha, B2.alpha]))
        return float(np.max(a / np.concatenate([gamma, gamma])))
    inv = np.abs(1.0 / np.concatenate([B1.alpha, B2.alpha]))
    return float(np.max(inv * np.concatenate([gamma, gamma])))


@dataclass(frozen=True)
class OrderComparison:
    m: int
    fitted: float
    analytic: float
    discrepancy: float

    def matches(self, tol: float) -> bool:
        return self.discrepancy <= tol


@dataclass(frozen=True)
class AsymptoticReport:
    coupling_type: str
    tau_grid: tuple[float, ...]
    fit_terms: int
    comparisons: dict = field(default_factory=dict)
    selected: Optional[str] = None
    tolerance: float = 1e-6

    def rows(self, variant: Optional[str] = None) -> list[OrderComparison]:
        key = variant if variant is not None else next(iter(self.comparisons))
        return self.comparisons[key]

    @property
    def passed(self) -> bool:
        if self.coupling_type == "delta":
            return all(r.matches(self.tolerance) for r in self.rows("delta"))
        return self.selected is not None


def fit_inverse_powers(tau: Sequence[float], values: Sequence[float], terms: int) -> np.ndarray:
    """Least-squares coefficients ``c_1..c_terms`` of ``sum_m c_m tau^-m``."""
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(tau) < terms:
        raise NumericalError(f"{len(tau)} sample points cannot determine {terms} coefficients")
    t0 = float(tau.min())
    x = t0 / tau
    V = np.vander(x, terms + 1, increasing=True)[:, 1:]
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    if np.linalg.cond(V) > 1e12:
        raise NumericalError("power fit is ill-conditioned; widen the tau grid")
    return coef * t0 ** np.arange(1, terms + 1)


def _plateau_terms(grid, values, orders: int) -> int:
    fits = {}
    for terms in range(orders + 1, len(grid) - 2):
        try:
            fits[terms] = fit_inverse_powers(grid, values, terms)[:orders]
        except NumericalError:
            break
    if len(fits) < 2:
        raise NumericalError("tau grid too short to choose the number of fitted powers")
    scale = np.maximum(np.abs(fits[max(fits)]), 1e-300)
    best, best_change = None, math.inf
    for terms in sorted(fits)[:-1]:
        change = float(np.max(np.abs(fits[terms + 1] - fits[terms]) / scale))
        if change < best_change:
            best, best_change = terms, change
    return best


def _discrepancy(fitted: float, analytic: float) -> float:
    # relative where the analytic value is nonzero, absolute otherwise
    diff = abs(fitted - analytic)
    return diff / abs(analytic) if analytic != 0.0 else diff


def asymptotic_logdet_check(
    g: MetricGraph,
    B1: CouplingSet,
    B2: CouplingSet,
    orders: int = 3,
    tau_grid: Optional[Sequence[float]] = None,
    fit_terms: Optional[int] = None,
    tolerance: float = 1e-6,
) -> AsymptoticReport:
    """Fit the ``1/tau`` expansion of :func:`logdet_ratio` and compare with ``-(-1)^m T_m``.

    The number of fitted powers defaults to the plateau of the fit: the count
    at which the leading ``orders`` coefficients change least when one more
    power is added (truncation error falls and noise amplification grows
    with the count).  For delta-prime couplings
    both residual variants are compared and ``selected`` names the one that
    matches at every order (``None`` unless exactly one does).
    """
    kind = _pair(g, B1, B2)
    grid = tuple(float(t) for t in (DEFAULT_TAU_GRID if tau_grid is None else tau_grid))
    if len(grid) < 2 * orders:
        raise NumericalError(f"need at least {2 * orders} tau points for {orders} orders")
    values = [logdet_ratio(g, B1, B2, t) for t in grid]
    if fit_terms is None:
        q = _series_ratio(g, B1, B2) / min(grid)
        if q >= 0.9:
            raise NumericalError("tau grid is too close to the coupling scale for a convergent fit")
        fit_terms = _plateau_terms(grid, values, orders)
    coef = fit_inverse_powers(grid, values, fit_terms)
    variants = ["delta"] if kind == "delta" else list(DELTA_PRIME_TRACE_VARIANTS)
    comparisons = {}
    for v in variants:
        rows = []
        for m in range(1, orders + 1):
            t_m = trace_residual(g, B1, B2, m, v if kind == "delta_prime" else "expansion")
            analytic = -((-1) ** m) * t_m
            rows.append(OrderComparison(m, float(coef[m - 1]), analytic, _discrepancy(float(coef[m - 1]), analytic)))
        comparisons[v] = rows
    selected = None
    if kind == "delta_prime":
        matching = [v for v, rows in comparisons.items() if all(r.matches(tolerance) for r in rows)]
        selected = matching[0] if len(matching) == 1 else None
    return AsymptoticReport(kind, grid, fit_terms, comparisons, selected, tolerance)


# ---------------------------------------------------------------------------
# isospectrality gate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateVerdict:
    verdict: str
    witness_order: Optional[int]
    residuals: tuple[float, ...]
    corollary: Optional[str] = None
    notes: tuple[str, ...] = ()

    @property
    def distinct(self) -> bool:
        return self.verdict == CERTIFIED_DISTINCT


def _regime(kind: str, a1: tuple, a2: tuple) -> tuple[Optional[str], list[str]]:
    """Name the uniqueness regime a pair falls into, if any."""
    notes = []
    if len(set(a1)) == 1 and len(set(a2)) == 1:
        return "scalar", notes
    if kind == "delta":
        zero1, zero2 = all(a == 0 for a in a1), all(a == 0 for a in a2)
        if (zero1 and all(a >= 0 for a in a2)) or (zero2 and all(a >= 0 for a in a1)):
            return "kirchhoff_vs_nonnegative", notes
        support1 = {i for i, a in enumerate(a1) if a != 0}
        support2 = {i for i, a in enumerate(a2) if a != 0}
        if len(support1 | support2) == 1:
            return "single_nonzero", notes
    ge = all(x >= y for x, y in zip(a1, a2))
    le = all(x <= y for x, y in zip(a1, a2))
    if ge or le:
        if kind == "delta_prime":
            notes.append("ordered delta-prime pair: 1/alpha is not monotone across 0, so T_1 may still vanish")
        return "ordered", notes
    return None, notes


def isospectrality_gate(
    g: MetricGraph, B1: CouplingSet, B2: CouplingSet, orders: int = 6, variant: str = "expansion"
) -> GateVerdict:
    """CERTIFIED_DISTINCT when some ``T_m`` (``m <= orders``) is nonzero, else INCONCLUSIVE.

    The verdict always rests on a nonzero residual; ``corollary`` only names
    the closed-form uniqueness regime the pair belongs to (``scalar``,
    ``kirchhoff_vs_nonnegative``, ``ordered`` or ``single_nonzero``).
    Vanishing residuals never certify isospectrality.
    """
    kind = _pair(g, B1, B2)
    if kind == "delta_prime":
        _require_invertible(B1, B2)
    report = trace_report(g, B1, B2, orders, variant)
    witness = None
    for m, zero in enumerate(report.vanishing(), start=1):
        if not zero:
            witness = m
            break
    regime, notes = (None, []) if B1.alpha == B2.alpha else _regime(kind, B1.alpha, B2.alpha)
    verdict = CERTIFIED_DISTINCT if witness is not None else INCONCLUSIVE
    if regime is not None and witness is None:
        notes.append(f"pair lies in the {regime} regime but no residual up to order {orders} is nonzero")
    return GateVerdict(verdict, witness, report.residuals, regime, tuple(notes))
