"""Recovery of coupling constants from a finite prefix of the spectrum.

Uniqueness holds for scalar couplings and for a single nonzero coupling; in
those regimes a one-dimensional search on the spectral misfit is enough.
Eigenvalue monotonicity in ``alpha`` is not assumed: the bracket is first
sampled on a grid and the best sample is refined by golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidCouplingError, NoMatchError, NotOrderedError, WindowError
from .graph_core import MetricGraph, require_valid
from .secular import CouplingSet, Spectrum, default_lower_bound, find_spectrum, golden_section
from .trace_formulae import CERTIFIED_DISTINCT, isospectrality_gate, trace_residual

DEFAULT_WEIGHT = 10
UNIQUE = "UNIQUE"
BEST_EFFORT = "BEST_EFFORT"
EQUAL = "EQUAL"


@dataclass(frozen=True)
class SpectralTarget:
    eigenvalues: tuple[float, ...]
    weight: int = DEFAULT_WEIGHT

    def __post_init__(self):
        ev = tuple(float(x) for x in self.eigenvalues)
        if not ev:
            raise ValueError("target spectrum is empty")
        if any(b < a for a, b in zip(ev, ev[1:])):
            raise ValueError("target eigenvalues must be sorted")
        weight = min(int(self.weight), len(ev))
        if weight < 1:
            raise ValueError("weight must be positive")
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "weight", weight)

    @classmethod
    def from_spectrum(cls, spectrum: Spectrum, weight: int = DEFAULT_WEIGHT) -> "SpectralTarget":
        return cls(tuple(spectrum.eigenvalues), weight)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, int]], weight: int = DEFAULT_WEIGHT) -> "SpectralTarget":
        ev = sorted(float(lam) for lam, mult in pairs for _ in range(int(mult)))
        return cls(tuple(ev), weight)

    @property
    def used(self) -> np.ndarray:
        return np.array(self.eigenvalues[: self.weight])


def forward_eigenvalues(g: MetricGraph, coupling: CouplingSet, count: int, upper: float) -> np.ndarray:
    """Lowest ``count`` eigenvalues, widening the window above ``upper`` if needed."""
    lower = default_lower_bound(g, coupling)
    upper = max(float(upper), lower + 1.0)
    for _ in range(30):
        spec = find_spectrum(g, coupling, (lower, upper))
        ev = spec.eigenvalues
        if len(ev) >= count:
            return ev[:count]
        upper += max(10.0, abs(upper))
    raise WindowError(f"could not cover {count} eigenvalues")


def spectral_misfit(g: MetricGraph, B: CouplingSet, target: SpectralTarget) -> float:
    """Sum of squared differences over the first ``target.weight`` eigenvalues."""
    ref = target.used
    gap = max(1.0, float(ref[-1] - ref[0]) / max(1, len(ref) - 1))
    ev = forward_eigenvalues(g, B, target.weight, float(ref[-1]) + gap)
    return float(np.sum((ev - ref) ** 2))


@dataclass(frozen=True)
class RecoveryResult:
    alpha: float
    misfit: float
    label: str
    vertex: Optional[int] = None
    evaluations: int = 0


def _match_tolerance(target: SpectralTarget, rel: float) -> float:
    return rel * (1.0 + float(np.sum(target.used**2)))


def _search(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    target: SpectralTarget,
    samples: int,
    xtol: float,
    rel_tol: float,
) -> tuple[float, float, int]:
    lo, hi = (float(x) for x in bracket)
    if not lo < hi:
        raise ValueError(f"empty bracket {bracket!r}")
    grid = np.linspace(lo, hi, samples)
    values = [f(x) for x in grid]
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, samples - 1)]
    cache: dict[float, float] = {}

    def cached(x):
        if x not in cache:
            cache[x] = f(x)
        return cache[x]

    x = golden_section(cached, a, b, xtol=xtol, absolute=True)
    candidates = [(cached(x), x), (values[i], float(grid[i]))]
    best_val, best_x = min(candidates)
    evaluations = samples + len(cache)
    if best_val > _match_tolerance(target, rel_tol):
        raise NoMatchError(
            f"no coupling in [{lo:g}, {hi:g}] reproduces the target (best misfit {best_val:.3g} at {best_x:.6g})"
        )
    return best_x, best_val, evaluations


def recover_scalar_coupling(
    g: MetricGraph,
    coupling_type: str,
    target: SpectralTarget,
    bracket: tuple[float, float],
    samples: int = 21,
    xtol: float = 1e-10,
    match_tol: float = 1e-10,
) -> RecoveryResult:
    """The ``alpha`` with ``B = alpha I`` that reproduces ``target``.

    A scalar coupling is determined by the spectrum, so the result is labelled
    UNIQUE.  Raises :class:`NoMatchError` when the smallest misfit in the
    bracket exceeds ``match_tol * (1 + sum lambda^2)``.
    """
    require_valid(g)
    N = g.vertex_count

    def f(a):
        return spectral_misfit(g, CouplingSet(coupling_type, (a,) * N), target)

    x, val, n = _search(f, bracket, target, samples, xtol, match_tol)
    return RecoveryResult(float(x), float(val), UNIQUE, None, n)


def _unknown_index(known: Sequence[Optional[float]]) -> int:
    marked = [i for i, a in enumerate(known) if a is None or (isinstance(a, float) and math.isnan(a))]
    if len(marked) != 1:
        raise InvalidCouplingError(f"exactly one coupling must be marked unknown, found {len(marked)}")
    return marked[0]


def recover_single_unknown(
    g: MetricGraph,
    coupling_type: str,
    known: Sequence[Optional[float]],
    target: SpectralTarget,
    bracket: tuple[float, float],
    samples: int = 21,
    xtol: float = 1e-10,
    match_tol: float = 1e-10,
) -> RecoveryResult:
    """Recover the one coupling marked ``None`` (or NaN) in ``known``.

    The result is UNIQUE for delta couplings whose other constants are all
    zero and BEST_EFFORT otherwise.
    """
    require_valid(g)
    if len(known) != g.vertex_count:
        raise InvalidCouplingError(f"{len(known)} coupling entries for {g.vertex_count} vertices")
    v = _unknown_index(known)
    fixed = [0.0 if i == v else float(a) for i, a in enumerate(known)]
    CouplingSet(coupling_type, tuple(fixed))

    def f(a):
        alpha = list(fixed)
        alpha[v] = a
        return spectral_misfit(g, CouplingSet(coupling_type, tuple(alpha)), target)

    x, val, n = _search(f, bracket, target, samples, xtol, match_tol)
    others_zero = all(a == 0.0 for i, a in enumerate(fixed) if i != v)
    label = UNIQUE if coupling_type == "delta" and others_zero else BEST_EFFORT
    return RecoveryResult(float(x), float(val), label, v, n)


@dataclass(frozen=True)
class OrderedVerdict:
    verdict: str
    t1: float
    witness_order: Optional[int] = None


def certify_ordered_distinct(g: MetricGraph, B1: CouplingSet, B2: CouplingSet) -> OrderedVerdict:
    """Entrywise ordered couplings: distinct spectra unless equal.

    For delta couplings ``T_1 = Tr(D Gamma^-1)`` is nonzero whenever the
    ordered pair differs.  For delta-prime couplings ``1/alpha`` is not
    monotone across zero, so the verdict falls back to the higher residuals
    and may be INCONCLUSIVE.
    """
    require_valid(g)
    if B1.coupling_type != B2.coupling_type:
        raise InvalidCouplingError("the two couplings have different matching types")
    ge = all(a >= b for a, b in zip(B1.alpha, B2.alpha))
    le = all(a <= b for a, b in zip(B1.alpha, B2.alpha))
    if not (ge or le):
        raise NotOrderedError("couplings are not entrywise ordered")
    if B1.alpha == B2.alpha:
        return OrderedVerdict(EQUAL, 0.0)
    t1 = trace_residual(g, B1, B2, 1)
    if B1.coupling_type == "delta":
        return OrderedVerdict(CERTIFIED_DISTINCT, t1, 1)
    gate = isospectrality_gate(g, B1, B2)
    return OrderedVerdict(gate.verdict, t1, gate.witness_order)
