"""Weyl-Titchmarsh M-matrix of a metric graph for delta and delta-prime couplings.

Boundary maps (per vertex ``V``):

* delta:  ``Gamma0 f = f(V)``,         ``Gamma1 f = sum of normal derivatives at V``
* delta': ``Gamma0 f = d_n f(V)``,     ``Gamma1 f = sum of endpoint values at V``

The normal derivative is ``+f'`` at ``x = 0`` and ``-f'`` at ``x = l``.
``M(lambda)`` is the matrix with ``M Gamma0 f = Gamma1 f`` on solutions of
``-f'' = lambda f`` that are continuous (delta) or have continuous normal
derivative (delta') at every vertex.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import (
    ContinuityError,
    LimitPointError,
    LoopPresentError,
    PoleProximityError,
    SingularEdgeError,
)
from .graph_core import MetricGraph, require_valid

CouplingType = Literal["delta", "delta_prime"]
COUPLING_TYPES = ("delta", "delta_prime")

# Off-diagonal factor of the delta-prime matrix: "verified" is 1/(k sin kl),
# "printed" is k / sin kl.  Only the first satisfies M Gamma0 f = Gamma1 f.
DELTA_PRIME_VARIANTS = ("verified", "printed")

POLE_TOL = 1e-12


def check_coupling_type(coupling_type: str) -> str:
    if coupling_type not in COUPLING_TYPES:
        raise ValueError(f"unknown coupling type {coupling_type!r}")
    return coupling_type


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter ``lam`` and its square root ``k`` with ``Im k >= 0``."""

    lam: complex
    k: complex

    @classmethod
    def from_lambda(cls, lam) -> "SpectralPoint":
        lam = complex(lam)
        if lam.imag == 0.0 and lam.real < 0:
            k = complex(0.0, math.sqrt(-lam.real))
        elif lam.imag == 0.0:
            k = complex(math.sqrt(lam.real), 0.0)
        else:
            k = cmath.sqrt(lam)
            if k.imag < 0:
                k = -k
        return cls(lam, k)

    @classmethod
    def from_k(cls, k) -> "SpectralPoint":
        k = complex(k)
        if k.imag < 0 or (k.imag == 0 and k.real < 0):
            k = -k
        return cls(k * k, k)

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0.0

    @property
    def is_limit(self) -> bool:
        return self.lam == 0

    @property
    def tau(self) -> complex:
        """``-i k``; positive real for negative real ``lam``."""
        return -1j * self.k


def as_point(point) -> SpectralPoint:
    if isinstance(point, SpectralPoint):
        return point
    return SpectralPoint.from_lambda(point)


@dataclass(frozen=True)
class MMatrixSample:
    point: SpectralPoint
    entries: np.ndarray
    coupling_type: str
    pole_proximity: float


def _pole_distance(g: MetricGraph, k: complex, include_zero: bool) -> float:
    best = math.inf
    for ell in g.lengths:
        m = round((k.real * ell) / math.pi)
        if m == 0 and not include_zero:
            m = 1
        best = min(best, abs(k - math.pi * m / ell))
    return best


def _edge_terms(k: complex, ell: float, point: SpectralPoint, kind: str, variant: str):
    """(diagonal, off-diagonal, loop) contributions of one edge of length ``ell``.

    Real ``lambda`` is evaluated in real arithmetic; negative ``lambda`` uses
    the hyperbolic forms with ``k = i kappa``.
    """
    if point.is_real and point.lam.real < 0:
        kappa = k.imag
        x = kappa * ell
        e2 = math.exp(-2.0 * x)
        coth = (1.0 + e2) / (1.0 - e2)
        csch = 2.0 * math.exp(-x) / (1.0 - e2)
        eh = math.exp(-x)
        tanh_half = (1.0 - eh) / (1.0 + eh)
        coth_half = (1.0 + eh) / (1.0 - eh)
        if kind == "delta":
            return -kappa * coth, kappa * csch, -2.0 * kappa * tanh_half
        off = -csch / kappa if variant == "verified" else kappa * csch
        return -coth / kappa, off, -2.0 * coth_half / kappa
    if point.is_real:
        kr = k.real
        s = math.sin(kr * ell)
        c = math.cos(kr * ell)
        half = 0.5 * kr * ell
        if kind == "delta":
            return -kr * c / s, kr / s, 2.0 * kr * math.tan(half)
        off = 1.0 / (kr * s) if variant == "verified" else kr / s
        return c / (kr * s), off, 2.0 / (kr * math.tan(half))
    s = cmath.sin(k * ell)
    c = cmath.cos(k * ell)
    if kind == "delta":
        return -k * c / s, k / s, 2.0 * k * cmath.tan(0.5 * k * ell)
    off = 1.0 / (k * s) if variant == "verified" else k / s
    return c / (k * s), off, 2.0 / (k * cmath.tan(0.5 * k * ell))


def _assemble(g: MetricGraph, point: SpectralPoint, kind: str, variant: str, edges=None) -> np.ndarray:
    dtype = float if point.is_real else complex
    M = np.zeros((g.vertex_count, g.vertex_count), dtype=dtype)
    k = point.k
    for t, e in enumerate(g.edges):
        if edges is not None and t not in edges:
            continue
        diag, off, loop = _edge_terms(k, e.length.numeric, point, kind, variant)
        if e.is_loop:
            M[e.tail, e.tail] += loop
        else:
            M[e.tail, e.tail] += diag
            M[e.head, e.head] += diag
            M[e.tail, e.head] += off
            M[e.head, e.tail] += off
    return M


def _guard(g: MetricGraph, point: SpectralPoint, kind: str) -> float:
    if point.is_limit:
        raise LimitPointError("lambda = 0: use m_limit_zero or the secular routines")
    k = point.k
    for e in g.edges:
        if abs(cmath.sin(k * e.length.numeric)) < POLE_TOL:
            raise PoleProximityError(
                f"sin(k l) vanishes on edge {e.id} at k = {k:.15g}"
            )
    return _pole_distance(g, k, include_zero=(kind == "delta_prime"))


def eval_m_delta(g: MetricGraph, point) -> MMatrixSample:
    """M-matrix for delta couplings.

    Diagonal ``-k sum_{E_j} cot(k l) + 2k sum_{L_j} tan(k l / 2)``, off-diagonal
    ``k sum_{C_jp} 1 / sin(k l)``.
    """
    require_valid(g)
    point = as_point(point)
    proximity = _guard(g, point, "delta")
    return MMatrixSample(point, _assemble(g, point, "delta", "verified"), "delta", proximity)


def eval_m_delta_prime(g: MetricGraph, point, variant: str = "verified") -> MMatrixSample:
    """M-matrix for delta-prime couplings.

    Diagonal ``(1/k) sum_{E_j} cot(k l) + (2/k) sum_{L_j} cot(k l / 2)``.  The
    off-diagonal is ``sum_{C_jp} 1 / (k sin(k l))`` for ``variant="verified"``
    and ``k sum_{C_jp} 1 / sin(k l)`` for ``variant="printed"``.
    """
    if variant not in DELTA_PRIME_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    require_valid(g)
    point = as_point(point)
    proximity = _guard(g, point, "delta_prime")
    return MMatrixSample(point, _assemble(g, point, "delta_prime", variant), "delta_prime", proximity)


def eval_m(g: MetricGraph, point, coupling_type: str, variant: str = "verified") -> MMatrixSample:
    if check_coupling_type(coupling_type) == "delta":
        return eval_m_delta(g, point)
    return eval_m_delta_prime(g, point, variant)


def m_limit_zero(g: MetricGraph) -> np.ndarray:
    """Entrywise limit of the delta M-matrix as ``lambda -> 0`` (loop-free graphs).

    Off-diagonal ``sum_{C_jp} 1/l``, diagonal ``-sum_{E_j} 1/l``.  The diagonal
    sign is the one of the actual limit of ``-k cot(k l)``; with unit lengths
    the result is ``A - D``, adjacency minus degree matrix.
    """
    require_valid(g)
    M = np.zeros((g.vertex_count, g.vertex_count))
    for e in g.edges:
        if e.is_loop:
            raise LoopPresentError(f"edge {e.id} is a loop; M(0) is defined only for loop-free graphs")
        inv = 1.0 / e.length.numeric
        M[e.tail, e.tail] -= inv
        M[e.head, e.head] -= inv
        M[e.tail, e.head] += inv
        M[e.head, e.tail] += inv
    return M


# ---------------------------------------------------------------------------
# kernel elements of the maximal operator and boundary maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelElement:
    """``f = a_plus e^{ikx} + a_minus e^{-ikx}`` on every edge ``[0, l_t]``.

    ``coeffs[t] = (a_plus, a_minus)``.
    """

    graph: MetricGraph
    k: complex
    coeffs: np.ndarray

    def endpoint_values(self) -> np.ndarray:
        """``(n, 2)`` array of ``f(0), f(l)`` per edge."""
        ell = self.graph.lengths
        ep = np.exp(1j * self.k * ell)
        em = np.exp(-1j * self.k * ell)
        ap, am = self.coeffs[:, 0], self.coeffs[:, 1]
        return np.stack([ap + am, ap * ep + am * em], axis=1)

    def endpoint_derivatives(self) -> np.ndarray:
        """``(n, 2)`` array of ``f'(0), f'(l)`` per edge."""
        ell = self.graph.lengths
        ep = np.exp(1j * self.k * ell)
        em = np.exp(-1j * self.k * ell)
        ap, am = self.coeffs[:, 0], self.coeffs[:, 1]
        ik = 1j * self.k
        return np.stack([ik * (ap - am), ik * (ap * ep - am * em)], axis=1)

    def normal_derivatives(self) -> np.ndarray:
        d = self.endpoint_derivatives()
        return np.stack([d[:, 0], -d[:, 1]], axis=1)

    def __call__(self, t: int, x):
        ap, am = self.coeffs[t]
        return ap * np.exp(1j * self.k * x) + am * np.exp(-1j * self.k * x)


def kernel_element(
    g: MetricGraph,
    point,
    coupling_type: str,
    seed: int = 0,
    vertex_data: Optional[np.ndarray] = None,
) -> KernelElement:
    """Solution of ``-f'' = lambda f`` with prescribed vertex data.

    For delta the vertex data are function values, for delta-prime they are
    normal derivatives.  Unless ``vertex_data`` is given they are drawn from a
    complex normal distribution seeded by ``seed``.
    """
    require_valid(g)
    check_coupling_type(coupling_type)
    point = as_point(point)
    k = point.k
    if vertex_data is None:
        rng = np.random.default_rng(seed)
        vertex_data = rng.standard_normal(g.vertex_count) + 1j * rng.standard_normal(g.vertex_count)
    vertex_data = np.asarray(vertex_data, dtype=complex)
    coeffs = np.empty((g.n_edges, 2), dtype=complex)
    for t, e in enumerate(g.edges):
        ep = cmath.exp(1j * k * e.length.numeric)
        em = cmath.exp(-1j * k * e.length.numeric)
        if coupling_type == "delta":
            A = np.array([[1.0, 1.0], [ep, em]])
        else:
            A = 1j * k * np.array([[1.0, -1.0], [-ep, em]])
        rhs = np.array([vertex_data[e.tail], vertex_data[e.head]])
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < POLE_TOL * max(1.0, float(np.abs(A).max()) ** 2):
            raise SingularEdgeError(f"edge {e.id}: interpolation singular at k = {k:.15g}")
        coeffs[t] = np.linalg.solve(A, rhs)
    return KernelElement(g, k, coeffs)


def boundary_maps(g: MetricGraph, f: KernelElement, coupling_type: str, tol: float = 1e-9):
    """``(Gamma0 f, Gamma1 f)`` for the boundary triple of ``coupling_type``.

    Raises :class:`ContinuityError` when the vertex data that ``Gamma0`` reads
    off disagree between endpoints beyond ``tol`` (relative).
    """
    check_coupling_type(coupling_type)
    vals = f.endpoint_values()
    nder = f.normal_derivatives()
    common, summed = (vals, nder) if coupling_type == "delta" else (nder, vals)
    gamma0 = np.zeros(g.vertex_count, dtype=complex)
    gamma1 = np.zeros(g.vertex_count, dtype=complex)
    scale = max(1.0, float(np.abs(common).max()))
    for v, ends in enumerate(g.endpoints):
        first = common[ends[0]]
        for t, side in ends[1:]:
            if abs(common[t, side] - first) > tol * scale:
                raise ContinuityError(f"vertex {g.vertex_name(v)}: boundary data not continuous")
        gamma0[v] = first
        gamma1[v] = sum(summed[t, side] for t, side in ends)
    return gamma0, gamma1


def validate_weyl_identity(
    g: MetricGraph,
    point,
    coupling_type: str,
    trials: int = 20,
    variant: str = "verified",
    seed: int = 0,
) -> float:
    """Max of ``|M Gamma0 f - Gamma1 f|_inf / |Gamma1 f|_inf`` over random kernel elements."""
    point = as_point(point)
    M = eval_m(g, point, coupling_type, variant).entries
    worst = 0.0
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        f = kernel_element(g, point, coupling_type, seed=int(rng.integers(2**63 - 1)))
        gamma0, gamma1 = boundary_maps(g, f, coupling_type)
        resid = np.abs(M @ gamma0 - gamma1).max() / np.abs(gamma1).max()
        worst = max(worst, float(resid))
    return worst
