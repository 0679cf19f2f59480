"""Spectra of delta / delta-prime graph Laplacians as zeros of secular functions.

Two independent routes are provided:

* the *edge* route builds the ``2n x 2n`` matching system ``S(lambda) c = 0``
  in a real per-edge basis; its kernel dimension is the multiplicity of the
  eigenvalue.  This route is authoritative and sees every eigenvalue, also
  those invisible to the M-matrix on non-simple graphs;
* the *vertex* route uses the entire function
  ``F(lambda) = det(B - M(lambda)) * prod_t r_t(lambda)`` with
  ``r_t = sin(k l_t) / k`` (delta) or ``r_t = k sin(k l_t)`` (delta-prime).
  Both factors are even in ``k``, so ``F`` is an entire function of
  ``lambda``; zero orders come from a local Taylor expansion of ``F``.

The real line is scanned in the variable ``s`` with ``lambda = s |s|``
(``s = k`` for positive ``lambda``, ``s = -kappa`` for negative ``lambda``).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh
from scipy.optimize import brentq

from .errors import InvalidCouplingError, NumericalError, WindowError
from .graph_core import MetricGraph, require_valid, vertex_valences
from .mfunction import SpectralPoint, _assemble, check_coupling_type

RANK_TOL = 1e-10
_SUBDIVISIONS = 16
_REFINE_DEPTH = 3
_ZERO_RESOLUTION = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CouplingSet:
    coupling_type: str
    alpha: tuple[float, ...]

    def __post_init__(self):
        check_coupling_type(self.coupling_type)
        alpha = tuple(float(a) for a in self.alpha)
        if not all(math.isfinite(a) for a in alpha):
            raise InvalidCouplingError("coupling constants must be finite reals")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def delta(cls, *alpha) -> "CouplingSet":
        return cls("delta", _flatten(alpha))

    @classmethod
    def delta_prime(cls, *alpha) -> "CouplingSet":
        return cls("delta_prime", _flatten(alpha))

    @classmethod
    def kirchhoff(cls, g: MetricGraph) -> "CouplingSet":
        return cls("delta", (0.0,) * g.vertex_count)

    @property
    def B(self) -> np.ndarray:
        return np.diag(np.array(self.alpha, dtype=float))

    @property
    def invertible(self) -> bool:
        return all(a != 0.0 for a in self.alpha)

    def with_alpha(self, alpha) -> "CouplingSet":
        return CouplingSet(self.coupling_type, tuple(alpha))

    def check_against(self, g: MetricGraph) -> None:
        if len(self.alpha) != g.vertex_count:
            raise InvalidCouplingError(
                f"{len(self.alpha)} coupling constants for a graph with {g.vertex_count} vertices"
            )


def _flatten(alpha) -> tuple:
    if len(alpha) == 1 and np.ndim(alpha[0]) == 1:
        return tuple(alpha[0])
    return tuple(alpha)


@dataclass(frozen=True)
class SecularSample:
    lam: complex
    k: complex
    F: complex


@dataclass(frozen=True)
class Spectrum:
    window: tuple[float, float]
    entries: tuple[tuple[float, int], ...]
    oracle: str = "edge"
    singular_gaps: tuple[float, ...] = ()
    lower_bound: Optional[float] = None
    warnings: tuple[str, ...] = ()

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.array([lam for lam, m in self.entries for _ in range(m)], dtype=float)

    def __len__(self) -> int:
        return sum(m for _, m in self.entries)


# ---------------------------------------------------------------------------
# scan variable
# ---------------------------------------------------------------------------


def _lam(s: float) -> float:
    return s * abs(s)


def _s(lam: float) -> float:
    return math.copysign(math.sqrt(abs(lam)), lam)


def scan_step(g: MetricGraph, step: Optional[float] = None) -> float:
    base = math.pi / (8.0 * float(g.lengths.max()))
    return base if step is None else min(base, float(step))


def default_lower_bound(g: MetricGraph, coupling: CouplingSet) -> float:
    """Heuristic floor for the spectrum.

    delta: the bound ``-(4 A^2 + 2 A / l_min)`` with ``A = max |alpha|``
    follows from ``|f(0)|^2 <= eps |f'|^2 + (1/eps + 1/l) |f|^2`` on each edge.
    delta': ``-(2 gamma_max / |alpha|_min + 2 / l_min)^2`` over negative
    couplings; a leaf with coupling ``alpha < 0`` binds at ``-(1/alpha)^2``.
    """
    l_min = float(g.lengths.min())
    if coupling.coupling_type == "delta":
        a = max((abs(x) for x in coupling.alpha), default=0.0)
        return -(4.0 * a * a + 2.0 * a / l_min) * 1.25 - 1.0
    negative = [abs(x) for x in coupling.alpha if x < 0]
    if not negative:
        return -1.0
    gamma_max = int(vertex_valences(g).max())
    return -((2.0 * gamma_max / min(negative) + 2.0 / l_min) ** 2) - 1.0


# ---------------------------------------------------------------------------
# edge route
# ---------------------------------------------------------------------------


def _basis_stack(lengths: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Endpoint data of two real solutions on every edge for every ``lam``.

    Returns an array of shape ``(P, n, 2, 2, 2)`` indexed by
    ``[point, edge, side (x=0 | x=l), kind (value | normal derivative), basis]``.

    Bases: ``cos kx, w sin(kx)/k`` for ``lam >= 0``; ``cosh kx, w sinh(kx)/k``
    for ``lam < 0`` with ``kappa l <= 1``; ``exp(-kx), exp(-k(l-x))`` beyond.
    ``w = max(1, k)`` balances the columns.  Every switch has positive
    determinant, so the sign of ``det S`` is continuous across it.
    """
    lam = np.asarray(lam, dtype=float)[:, None]
    ell = np.asarray(lengths, dtype=float)[None, :]
    x = np.sqrt(np.abs(lam)) * ell
    k = np.broadcast_to(np.sqrt(np.abs(lam)), x.shape)
    w = np.maximum(1.0, k)
    out = np.zeros(lam.shape[:1] + ell.shape[1:] + (2, 2, 2))

    osc = np.broadcast_to(lam >= 0, x.shape)
    c = np.cos(x)
    s_over_k = ell * np.sinc(x / np.pi)
    hyp = np.broadcast_to(lam < 0, x.shape) & (x <= 1.0)
    ch = np.cosh(np.minimum(x, 1.0))
    xs = np.where(x > 0, np.minimum(x, 1.0), 1.0)
    sh_over_k = np.where(x > 0, ell * np.sinh(xs) / xs, ell)
    cont = np.where(osc, c, ch)
    odd = np.where(osc, s_over_k, sh_over_k)
    slope = np.where(osc, -k * k * s_over_k, k * k * sh_over_k)
    smooth = osc | hyp
    # values at 0 and l, then derivatives (d/dx) at 0 and l
    v0 = np.stack([np.ones_like(x), np.zeros_like(x)], -1)
    vl = np.stack([cont, w * odd], -1)
    d0 = np.stack([np.zeros_like(x), w], -1)
    dl = np.stack([slope, w * cont], -1)

    e = np.exp(-x)
    v0 = np.where(smooth[..., None], v0, np.stack([np.ones_like(x), e], -1))
    vl = np.where(smooth[..., None], vl, np.stack([e, np.ones_like(x)], -1))
    d0 = np.where(smooth[..., None], d0, np.stack([-k * np.ones_like(x), k * e], -1))
    dl = np.where(smooth[..., None], dl, np.stack([-k * e, k * np.ones_like(x)], -1))

    out[:, :, 0, 0] = v0
    out[:, :, 1, 0] = vl
    out[:, :, 0, 1] = d0
    out[:, :, 1, 1] = -dl
    return out


def _stencil(g: MetricGraph, coupling: CouplingSet) -> np.ndarray:
    """Row weights ``W[row, edge, side, kind]`` of the matching conditions.

    Rows per vertex of valence ``gamma``: ``gamma - 1`` continuity rows (values
    for delta, normal derivatives for delta') and one coupling row.
    """
    n = g.n_edges
    common, summed = (0, 1) if coupling.coupling_type == "delta" else (1, 0)
    W = np.zeros((2 * n, n, 2, 2))
    row = 0
    for v, ends in enumerate(g.endpoints):
        t0, side0 = ends[0]
        for t, side in ends[1:]:
            W[row, t0, side0, common] += 1.0
            W[row, t, side, common] -= 1.0
            row += 1
        for t, side in ends:
            W[row, t, side, summed] += 1.0
        W[row, t0, side0, common] -= coupling.alpha[v]
        row += 1
    return W


def _matching_stack(g: MetricGraph, W: np.ndarray, lams) -> np.ndarray:
    data = _basis_stack(g.lengths, lams)
    S = np.einsum("rtsk,ptskb->prtb", W, data)
    return S.reshape(S.shape[0], S.shape[1], -1)


def _normalised_stack(g: MetricGraph, W: np.ndarray, lams) -> np.ndarray:
    """Matching matrices with every row divided by its cancellation-free size.

    Dividing by the actual row norm would blow up a row that cancels at an
    eigenvalue (e.g. ``1 - alpha kappa = 0`` on a delta' leaf) and bury the
    kernel in amplified rounding.  ``sum |W| |basis|`` keeps such rows small.
    """
    data = _basis_stack(g.lengths, lams)
    S = np.einsum("rtsk,ptskb->prtb", W, data)
    size = np.einsum("rtsk,ptskb->pr", np.abs(W), np.abs(data))
    size[size == 0] = 1.0
    S = S / size[:, :, None, None]
    return S.reshape(S.shape[0], S.shape[1], -1)


def edge_matching_matrix(g: MetricGraph, coupling: CouplingSet, lam: float) -> np.ndarray:
    """Real ``2n x 2n`` matrix whose kernel is the eigenspace at ``lam``."""
    lam = float(lam)
    if not math.isfinite(lam):
        raise WindowError("spectral parameter must be finite")
    return _matching_stack(g, _stencil(g, coupling), [lam])[0]


def _singular_values(g, coupling, lam) -> np.ndarray:
    # rows only: rescaling columns would inflate a basis direction that
    # genuinely vanishes at an eigenvalue
    S = _normalised_stack(g, _stencil(g, coupling), [float(lam)])[0]
    return np.linalg.svd(S, compute_uv=False)


def _kernel_dimension(sv: np.ndarray) -> tuple[int, float]:
    tol = len(sv) * sv[0] * RANK_TOL
    mult = int(np.sum(sv < tol))
    gap = float(sv[-mult - 1] / sv[0]) if mult < len(sv) else 0.0
    return mult, gap


def multiplicity_at(g: MetricGraph, coupling: CouplingSet, lam0: float) -> int:
    """Dimension of the eigenspace at ``lam0`` (0 if ``lam0`` is not an eigenvalue)."""
    require_valid(g)
    coupling.check_against(g)
    return _kernel_dimension(_singular_values(g, coupling, lam0))[0]


# ---------------------------------------------------------------------------
# vertex route
# ---------------------------------------------------------------------------


def _bordered_blocks(ell: float, k: complex, lam: complex):
    """Endpoint values ``Y`` and normal derivatives ``X`` of ``cos kx``, ``sin(kx)/k``."""
    x = k * ell
    c = np.cos(x)
    s_over_k = ell * np.sinc(x / np.pi)
    k_s = lam * s_over_k
    Y = np.array([[1.0, 0.0], [c, s_over_k]], dtype=complex)
    X = np.array([[0.0, 1.0], [k_s, -c]], dtype=complex)
    return Y, X


def secular_value(g: MetricGraph, coupling: CouplingSet, lam, bad_threshold: float = 0.5) -> complex:
    """``F(lambda)`` evaluated without overflow near the Dirichlet/Neumann grid.

    Edges with ``|sin(k l)| >= bad_threshold`` enter through the M-matrix
    directly.  The remaining edges are folded in through the bordered
    determinant ``det [[Y, P], [P^T X, B - M_good]] = det(Y) det(B - M)``
    whose blocks are entire in ``lambda``.
    """
    point = SpectralPoint.from_lambda(lam)
    k = point.k
    kind = coupling.coupling_type
    sines = np.sin(k * g.lengths)
    bad = [t for t in range(g.n_edges) if abs(sines[t]) < bad_threshold]
    good = set(range(g.n_edges)) - set(bad)

    C = coupling.B.astype(complex)
    if good:
        C = C - _assemble(g, point, kind, "verified", edges=good)
    factor = 1.0 + 0j
    for t in good:
        factor *= sines[t] / k if kind == "delta" else k * sines[t]
    if not bad:
        return complex(np.linalg.det(C) * factor)

    b = len(bad)
    N = g.vertex_count
    Z = np.zeros((2 * b + N, 2 * b + N), dtype=complex)
    Z[2 * b :, 2 * b :] = C
    for i, t in enumerate(bad):
        e = g.edges[t]
        Y, X = _bordered_blocks(float(g.lengths[t]), k, point.lam)
        first, second = (Y, X) if kind == "delta" else (X, Y)
        sl = slice(2 * i, 2 * i + 2)
        Z[sl, sl] = first
        Z[2 * i, 2 * b + e.tail] += 1.0
        Z[2 * i + 1, 2 * b + e.head] += 1.0
        Z[2 * b + e.tail, sl] += second[0]
        Z[2 * b + e.head, sl] += second[1]
    sign = 1.0 if kind == "delta" else (-1.0) ** b
    return complex(sign * np.linalg.det(Z) * factor)


def entire_secular(g: MetricGraph, coupling: CouplingSet, lam) -> SecularSample:
    """Sample of the entire secular function at ``lam`` (real samples are real)."""
    require_valid(g)
    coupling.check_against(g)
    point = SpectralPoint.from_lambda(lam)
    value = secular_value(g, coupling, point.lam)
    if point.is_real:
        value = complex(value.real, 0.0)
    return SecularSample(point.lam, point.k, value)


def _taylor_zeros(F: Callable[[complex], complex], center: float, radius: float, samples: int = 64):
    """Real zeros of an entire ``F`` inside ``|z - center| < 0.8 radius``, clustered.

    Taylor coefficients come from an FFT on the circle; the zeros of the
    truncated polynomial are grouped and each group reports its centroid and
    size (the zero order).
    """
    theta = 2.0 * np.pi * np.arange(samples) / samples
    z = center + radius * np.exp(1j * theta)
    vals = np.array([F(zz) for zz in z])
    coef = np.fft.fft(vals) / samples
    mag = np.abs(coef)
    if mag.max() == 0:
        raise NumericalError("secular function vanishes identically on the circle")
    # the upper half of the spectrum is rounding noise for a resolved circle
    noise = float(mag[samples // 2 :].max())
    if noise > 1e-6 * mag.max():
        raise NumericalError("Taylor series of the secular function does not decay on the circle")
    keep = np.nonzero(mag > max(1e3 * noise, 1e-14 * mag.max()))[0]
    deg = int(keep.max())
    if deg == 0:
        return []
    roots = np.roots(coef[: deg + 1][::-1])
    roots = roots[np.abs(roots) < 0.8]
    roots = roots[np.abs(roots.imag) < 1e-3]
    clusters: list[list[complex]] = []
    for r in sorted(roots, key=lambda r: r.real):
        if clusters and abs(r - np.mean(clusters[-1])) < 1e-4:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    return [(center + radius * float(np.mean(c).real), len(c)) for c in clusters]


# ---------------------------------------------------------------------------
# root isolation
# ---------------------------------------------------------------------------


def golden_section(
    f: Callable[[float], float], a: float, b: float, xtol: float = 1e-15, absolute: bool = False
) -> float:
    """Minimiser of a unimodal ``f`` on ``[a, b]``.

    Unlike the bounded Brent search in scipy this keeps shrinking below
    ``sqrt(eps)`` relative width, which matters for V-shaped minima.
    """
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        width = xtol if absolute else xtol * max(1.0, abs(a) + abs(b))
        if abs(b - a) <= width:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


class _Scanner:
    """Sign-change bracketing plus recursive refinement of significant dips.

    ``probe(xs)`` maps an array of scan points to rows
    ``(signed value, dip measure, slope)``; the dip measure is nonnegative and
    small near zeros of any order and ``slope`` is its derivative in ``s``.
    ``value(s)`` is the cheap signed value used by the root bracketing.  Flat
    stretches with rounding noise are ignored: a grid minimum must sit
    measurably below a neighbour, or the tangent lines at the ends of a cell
    must meet measurably below both end values.
    """

    def __init__(self, probe, value, jobs: int = 1, floor: float = 0.0):
        self.probe = probe
        self.value = value
        self.jobs = jobs
        self.floor = floor
        self.roots: list[float] = []
        self.dips: list[tuple[float, float]] = []
        self.grid: np.ndarray = np.empty(0)

    def _values(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.jobs > 1 and len(xs) > 64:
            chunks = np.array_split(xs, self.jobs)
            with ThreadPoolExecutor(self.jobs) as pool:
                return np.concatenate(list(pool.map(self.probe, chunks)))
        return self.probe(xs)

    def _dip(self, x: float) -> float:
        return float(self.probe(np.array([x]))[0, 1])

    def run(self, a: float, b: float, step: float) -> None:
        npts = max(2, int(math.ceil((b - a) / step)))
        self.grid = np.linspace(a, b, npts + 1)
        self._isolate(self.grid, _REFINE_DEPTH)

    def _significant(self, d: float, reference: float) -> bool:
        return d < (1.0 - 1e-8) * reference or d < self.floor

    def _isolate(self, xs, depth: int) -> None:
        signed, dip, slope = self._values(xs).T
        last = len(xs) - 1
        bracketed = set()
        for i in range(last + 1):
            if signed[i] == 0.0:
                self.roots.append(float(xs[i]))
                bracketed.add(i)
            elif i < last and signed[i] * signed[i + 1] < 0:
                root = brentq(self.value, xs[i], xs[i + 1], xtol=1e-14, rtol=1e-15, maxiter=200)
                self.roots.append(float(root))
                bracketed.update((i, i + 1))
        regions = []
        for i in range(last + 1):
            left = dip[i - 1] if i > 0 else math.inf
            right = dip[i + 1] if i < last else math.inf
            if not (dip[i] <= left and dip[i] <= right):
                continue
            # a bracketed minimum may still hide two more zeros in the adjacent
            # cell; the two coarsest levels look, finer levels trust the bracket
            if depth < _REFINE_DEPTH - 1 and any(j in bracketed for j in (i - 1, i, i + 1)):
                continue
            if self._significant(dip[i], min(max(left, right), 1e300)):
                regions.append((max(i - 1, 0), min(i + 1, last)))
        for i in range(last):
            if signed[i] * signed[i + 1] <= 0 or not (slope[i] < 0 < slope[i + 1]):
                continue
            if any(a <= i and i + 1 <= b for a, b in regions):
                continue
            # tangents from both ends meet at the V-shaped estimate of the minimum
            x_meet = (dip[i + 1] - dip[i] + slope[i] * xs[i] - slope[i + 1] * xs[i + 1]) / (slope[i] - slope[i + 1])
            y_meet = dip[i] + slope[i] * (x_meet - xs[i])
            if self._significant(y_meet, min(dip[i], dip[i + 1])):
                regions.append((i, i + 1))
        for a, b in regions:
            lo, hi = xs[a], xs[b]
            if depth > 0:
                self._isolate(np.linspace(lo, hi, _SUBDIVISIONS + 1), depth - 1)
            else:
                x = golden_section(self._dip, lo, hi)
                self.dips.append((x, hi - lo))

    def shared_cells(self, roots_s: Sequence[float]) -> int:
        if len(self.grid) < 2 or not len(roots_s):
            return 0
        cells = np.searchsorted(self.grid, np.asarray(roots_s), side="right")
        _, counts = np.unique(cells, return_counts=True)
        return int(np.sum(counts > 1))


def _dedupe(values: Sequence[float], tol: float) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if out and abs(v - out[-1]) <= tol * max(1.0, abs(v)):
            continue
        out.append(v)
    return out


def _scan_range(window, g, step):
    lo, hi = window
    return _s(lo), _s(hi), scan_step(g, step)


def _check_window(window) -> tuple[float, float]:
    lo, hi = (float(w) for w in window)
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise WindowError(f"degenerate window {window!r}")
    return lo, hi


def _spectrum_edge(g, coupling, window, step, jobs):
    W = _stencil(g, coupling)

    def normalised(s):
        s = np.asarray(s, dtype=float)
        return _normalised_stack(g, W, s * np.abs(s))

    def value(s):
        # rows have norm at most 1, so |det| <= 1; the determinant is smooth in s
        # and keeps the superlinear convergence of the bracketing solver
        return float(np.linalg.det(normalised([s])[0]))

    def probe(xs):
        d = 1e-7 * np.maximum(1.0, np.abs(xs))
        A = normalised(np.concatenate([xs, xs + d, xs - d]))
        P = len(xs)
        u, sv, vt = np.linalg.svd(A[:P])
        dA = (A[P : 2 * P] - A[2 * P :]) / (2 * d)[:, None, None]
        slope = np.einsum("pi,pij,pj->p", u[:, :, -1], dA, vt[:, -1, :])
        signed = np.linalg.det(A[:P])
        return np.stack([signed, sv[:, -1], slope], axis=1)

    s_lo, s_hi, h = _scan_range(window, g, step)
    scanner = _Scanner(probe, value, jobs, floor=1e-3)
    scanner.run(s_lo, s_hi, h)
    candidates = list(scanner.roots) + [x for x, _ in scanner.dips] + [s_lo, s_hi]
    found = {}
    for s in _dedupe(candidates, 1e-9):
        lam = _lam(s)
        if abs(lam) < 1e-14:
            continue
        mult, gap = _kernel_dimension(_singular_values(g, coupling, lam))
        if mult:
            found[lam] = (mult, gap)
    if window[0] <= 0.0 <= window[1]:
        mult, gap = _kernel_dimension(_singular_values(g, coupling, 0.0))
        if mult:
            # the rank test at 0 already counts eigenvalues it cannot resolve from 0
            found = {lam: v for lam, v in found.items() if abs(lam) > _ZERO_RESOLUTION}
            found[0.0] = (mult, gap)
    return found, scanner


def _spectrum_vertex(g, coupling, window, step, jobs):
    def F(z):
        return secular_value(g, coupling, z)

    def value(s):
        return F(_lam(s)).real

    def probe_one(s):
        # F is real on the real axis, so a complex step gives dF/ds exactly
        lam = _lam(s)
        h = 1e-20 * max(1.0, abs(s))
        shifted = F(lam + 1j * h * 2.0 * abs(s)) if s != 0 else F(1j * h * h)
        v = F(lam).real
        derivative = shifted.imag / h
        return v, abs(v), math.copysign(1.0, v) * derivative

    def probe(xs):
        return np.array([probe_one(float(x)) for x in xs]).reshape(-1, 3)

    s_lo, s_hi, h = _scan_range(window, g, step)
    scanner = _Scanner(probe, value, jobs)
    scanner.run(s_lo, s_hi, h)
    centres = [(x, None) for x in scanner.roots] + list(scanner.dips)
    found: dict[float, tuple[int, float]] = {}
    fine = h / _SUBDIVISIONS ** _REFINE_DEPTH
    for s, width in centres:
        lam = _lam(s)
        width = fine if width is None else width
        radius = max(abs(_lam(s + width) - lam), abs(_lam(s - width) - lam), 1e-6 * max(1.0, abs(lam)))
        for root, order in _taylor_zeros(F, lam, radius):
            if abs(root - lam) > 0.5 * radius:
                continue
            # simple zeros: the bracketed root is more accurate than the centroid
            if order == 1 and scanner.roots:
                nearest = min((_lam(r) for r in scanner.roots), key=lambda x: abs(x - root))
                if abs(nearest - root) <= 1e-6 * radius:
                    root = nearest
            if abs(root) < 1e-12:
                root = 0.0
            found[root] = (order, math.nan)
    merged: dict[float, tuple[int, float]] = {}
    for lam in sorted(found):
        if merged and abs(lam - max(merged)) <= 1e-9 * max(1.0, abs(lam)):
            continue
        merged[lam] = found[lam]
    return merged, scanner


def find_spectrum(
    g: MetricGraph,
    coupling: CouplingSet,
    window: tuple[float, float],
    step: Optional[float] = None,
    oracle: str = "edge",
    jobs: int = 1,
) -> Spectrum:
    """All eigenvalues in the closed ``window`` with multiplicities.

    ``oracle="edge"`` (default) uses the matching determinant and the rank
    test; ``oracle="vertex"`` the entire secular function and local Taylor
    expansions.  The scan step in ``k`` is ``min(pi / (8 l_max), step)``.
    """
    require_valid(g)
    coupling.check_against(g)
    window = _check_window(window)
    if oracle == "edge":
        found, scanner = _spectrum_edge(g, coupling, window, step, jobs)
    elif oracle == "vertex":
        found, scanner = _spectrum_vertex(g, coupling, window, step, jobs)
    else:
        raise ValueError(f"unknown oracle {oracle!r}")
    entries, gaps = [], []
    for lam in sorted(found):
        if window[0] - 1e-12 * max(1.0, abs(window[0])) <= lam <= window[1] + 1e-12 * max(1.0, abs(window[1])):
            mult, gap = found[lam]
            entries.append((float(lam), int(mult)))
            gaps.append(gap)
    notes = []
    shared = scanner.shared_cells([_s(lam) for lam, _ in entries])
    if shared:
        notes.append(f"{shared} scan cell(s) contained more than one eigenvalue; consider a smaller step")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    bound = default_lower_bound(g, coupling)
    if window[0] > bound:
        notes.append(f"window starts above the heuristic spectral floor {bound:.6g}; lower eigenvalues are not searched")
    return Spectrum(window, tuple(entries), oracle, tuple(gaps), bound, tuple(notes))


def lowest_eigenvalues(
    g: MetricGraph,
    coupling: CouplingSet,
    count: int,
    lower: Optional[float] = None,
    oracle: str = "edge",
) -> np.ndarray:
    """The ``count`` lowest eigenvalues (with multiplicity), growing the window as needed."""
    lower = default_lower_bound(g, coupling) if lower is None else lower
    total = float(g.lengths.sum())
    k_hi = math.pi * (count + g.vertex_count + g.n_edges + 2) / total
    upper = max(k_hi * k_hi, 1.0)
    for _ in range(12):
        spec = find_spectrum(g, coupling, (lower, upper), oracle=oracle)
        if len(spec) >= count:
            return spec.eigenvalues[:count]
        upper *= 2.0
    raise NumericalError(f"could not locate {count} eigenvalues")


# ---------------------------------------------------------------------------
# finite element oracle
# ---------------------------------------------------------------------------


def _fem_matrices(g: MetricGraph, coupling: CouplingSet, per_unit: float):
    """Stiffness and mass matrices of the quadratic form on P1 elements.

    delta: vertex values are shared degrees of freedom and the form carries
    ``alpha_m |f(V_m)|^2``.  delta': every edge end is its own degree of
    freedom and the form carries ``|sum f(V_m)|^2 / alpha_m``; a vanishing
    ``alpha_m`` becomes the constraint ``sum f(V_m) = 0``.
    """
    shared = coupling.coupling_type == "delta"
    N = g.vertex_count
    elements = [max(2, int(math.ceil(per_unit * ell))) for ell in g.lengths]
    rows, cols, kv, mv = [], [], [], []
    ends: list[list[int]] = [[] for _ in range(N)]
    nxt = N if shared else 0
    for t, e in enumerate(g.edges):
        m = elements[t]
        h = float(g.lengths[t]) / m
        if shared:
            nodes = np.array([e.tail] + list(range(nxt, nxt + m - 1)) + [e.head])
            nxt += m - 1
        else:
            nodes = np.arange(nxt, nxt + m + 1)
            nxt += m + 1
            ends[e.tail].append(int(nodes[0]))
            ends[e.head].append(int(nodes[-1]))
        a, b = nodes[:-1], nodes[1:]
        for p, q, kk, mm in ((a, a, 1.0 / h, h / 3.0), (b, b, 1.0 / h, h / 3.0), (a, b, -1.0 / h, h / 6.0), (b, a, -1.0 / h, h / 6.0)):
            rows.append(p)
            cols.append(q)
            kv.append(np.full(len(p), kk))
            mv.append(np.full(len(p), mm))
    total = nxt
    if shared:
        rows.append(np.arange(N))
        cols.append(np.arange(N))
        kv.append(np.asarray(coupling.alpha, dtype=float))
        mv.append(np.zeros(N))
    else:
        for v, idx in enumerate(ends):
            if coupling.alpha[v] != 0.0:
                p, q = np.meshgrid(idx, idx, indexing="ij")
                rows.append(p.ravel())
                cols.append(q.ravel())
                kv.append(np.full(p.size, 1.0 / coupling.alpha[v]))
                mv.append(np.zeros(p.size))
    r, c = np.concatenate(rows), np.concatenate(cols)
    K = sparse.csc_matrix((np.concatenate(kv), (r, c)), shape=(total, total))
    M = sparse.csc_matrix((np.concatenate(mv), (r, c)), shape=(total, total))
    if not shared:
        constrained = [idx for v, idx in enumerate(ends) if coupling.alpha[v] == 0.0]
        if constrained:
            T = _constraint_basis(total, constrained)
            K, M = (T.T @ K @ T).tocsc(), (T.T @ M @ T).tocsc()
    return K, M


def _constraint_basis(total: int, groups: list[list[int]]):
    # eliminate the first end of each group through f_first = -sum(f_others)
    dropped = {idx[0]: idx[1:] for idx in groups}
    keep = [j for j in range(total) if j not in dropped]
    col = {j: i for i, j in enumerate(keep)}
    rows, cols, vals = [], [], []
    for j in keep:
        rows.append(j)
        cols.append(col[j])
        vals.append(1.0)
    for j, others in dropped.items():
        for o in others:
            rows.append(j)
            cols.append(col[o])
            vals.append(-1.0)
    return sparse.csc_matrix((vals, (rows, cols)), shape=(total, len(keep)))


def _fem_levels_needed(g: MetricGraph, count: int) -> float:
    # Weyl estimate of the largest wanted k; 32 elements per unit of k puts
    # the extrapolated error below 1e-8 relative
    k_max = math.pi * (count + g.vertex_count) / float(g.lengths.sum())
    return max(64.0, 32.0 * k_max)


def fem_spectrum(
    g: MetricGraph, coupling: CouplingSet, count: int, mesh: Optional[float] = None
) -> np.ndarray:
    """Lowest ``count`` eigenvalues from P1 finite elements, Richardson-extrapolated.

    ``mesh`` is the number of elements per unit length on the coarse level
    (chosen from a Weyl estimate when omitted); the fine level halves the
    element size.
    """
    require_valid(g)
    coupling.check_against(g)
    if count < 1:
        raise ValueError("count must be positive")
    mesh = _fem_levels_needed(g, count) if mesh is None else float(mesh)
    shift = default_lower_bound(g, coupling) - 1.0
    levels = []
    for per_unit in (mesh, 2 * mesh):
        K, M = _fem_matrices(g, coupling, per_unit)
        dof = K.shape[0]
        if per_unit == mesh and count > 0.2 * dof:
            raise NumericalError(f"mesh too coarse: {count} eigenvalues requested from {dof} unknowns")
        if dof <= 400:
            lam = eigh(K.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, count - 1])
        else:
            lam = eigsh(K, k=count, M=M, sigma=shift, which="LM", return_eigenvectors=False)
        levels.append(np.sort(lam))
    coarse, fine = levels
    return (4.0 * fine - coarse) / 3.0


def fem_spectrum_delta(
    g: MetricGraph, coupling: CouplingSet, count: int, mesh: Optional[float] = None
) -> np.ndarray:
    """Finite element oracle restricted to delta couplings."""
    if coupling.coupling_type != "delta":
        raise InvalidCouplingError("expected a delta coupling")
    return fem_spectrum(g, coupling, count, mesh)
