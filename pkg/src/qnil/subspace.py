"""Constructive common invariant subspaces on a finite truncation window.

Closures are replaced by spans on ``[1, d]`` and every claim carries a
residual.  Orbit spans are grown breadth-first from an anchor basis vector
``e_k``; a candidate is kept only when it leaves the current span, which
keeps the tree linear in the dimension.

Depth-limited orbits are not invariant at their outermost layer: the
images of depth-``D`` words are simply not generated.  Invariance residuals
are therefore measured on the *interior*, the span of vectors produced at
depth ``< D`` (``checks.interior_dim`` leading basis vectors), whose images
all lie in the generated span.  When the orbit saturates before ``D`` the
interior is the whole subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coordspace import CoordVector, basis_vector, dominating_coordinate, in_cone, vec_norm
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    HypothesisRefuted,
    InvalidSeed,
    NotPositive,
    ZeroPatternViolation,
)
from .operators import Operator, OperatorTuple, derive_weights, is_positive
from .quasinil import REFUTED, QnilVerdict, _ordered_map

__all__ = [
    "OrbitGenParams",
    "SubspaceChecks",
    "SubspaceResult",
    "WeightedResult",
    "CommutantCheck",
    "orbit_vectors",
    "span_basis",
    "projection_vanishing_check",
    "kernel_intersection",
    "common_invariant_subspace",
    "ideal_support",
    "commutant_invariance",
    "weighted_invariant_subspace",
    "corollary_subspace",
]


@dataclass(frozen=True)
class OrbitGenParams:
    depth: int = 12
    rank_tol: float = 1e-10
    truncation_dim: int = 16
    budget: int = 1 << 20

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not self.rank_tol > 0:
            raise ValueError("rank_tol must be > 0")
        if self.truncation_dim < 2:
            raise ValueError("truncation_dim must be >= 2")

    def to_json(self):
        return {"depth": self.depth, "rank_tol": self.rank_tol,
                "truncation_dim": self.truncation_dim, "budget": self.budget}


@dataclass(frozen=True)
class SubspaceChecks:
    fk_vanishing_max: float | None
    invariance_residuals: tuple[float, ...]
    dimension: int
    truncation_dim: int
    nontrivial: bool
    interior_dim: int
    saturated: bool
    window_leak: float = 0.0

    def to_json(self):
        return {
            "fk_vanishing_max": self.fk_vanishing_max,
            "invariance_residuals": list(self.invariance_residuals),
            "dimension": self.dimension,
            "truncation_dim": self.truncation_dim,
            "nontrivial": self.nontrivial,
            "interior_dim": self.interior_dim,
            "saturated": self.saturated,
            "window_leak": self.window_leak,
        }

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["invariance_residuals"] = tuple(d["invariance_residuals"])
        return cls(**d)


@dataclass(frozen=True)
class SubspaceResult:
    """Orthonormal basis of a candidate invariant subspace plus its evidence."""

    kind: str  # "orbit" or "kernel"
    basis: tuple[CoordVector, ...]
    anchor_index: int | None
    checks: SubspaceChecks
    ideal_support: tuple[int, ...] | None = None
    is_ideal: bool | None = None
    flags: tuple[str, ...] = ()

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def matrix(self) -> np.ndarray:
        d = self.checks.truncation_dim
        if not self.basis:
            return np.zeros((d, 0), dtype=complex)
        return np.column_stack([q.to_dense(d) for q in self.basis])

    def projector(self) -> np.ndarray:
        Q = self.matrix()
        return Q @ Q.conj().T

    def to_json(self) -> dict:
        d = self.checks.truncation_dim
        basis = []
        for q in self.basis:
            a = q.to_dense(d)
            basis.append({"re": a.real.tolist(), "im": a.imag.tolist()})
        return {
            "kind": self.kind,
            "anchor_index": self.anchor_index,
            "basis": basis,
            "checks": self.checks.to_json(),
            "ideal_support": list(self.ideal_support) if self.ideal_support is not None else None,
            "is_ideal": self.is_ideal,
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, d: dict) -> "SubspaceResult":
        basis = tuple(CoordVector.from_dense(np.array(b["re"]) + 1j * np.array(b["im"])) for b in d["basis"])
        J = d.get("ideal_support")
        return cls(d["kind"], basis, d.get("anchor_index"), SubspaceChecks.from_json(d["checks"]),
                   tuple(J) if J is not None else None, d.get("is_ideal"), tuple(d.get("flags", ())))


class _OrthoBasis:
    """Modified Gram-Schmidt with one full reorthogonalisation pass."""

    def __init__(self, d: int, rank_tol: float):
        self.d = d
        self.rank_tol = rank_tol
        self.q: list[np.ndarray] = []

    def residual(self, v: np.ndarray) -> np.ndarray:
        w = v.copy()
        for _ in range(2):
            for q in self.q:
                w -= np.vdot(q, w) * q
        return w

    def add(self, v: np.ndarray) -> bool:
        nrm0 = np.linalg.norm(v)
        if nrm0 == 0:
            return False
        w = self.residual(v)
        nrm = np.linalg.norm(w)
        if nrm <= self.rank_tol * nrm0:
            return False
        self.q.append(w / nrm)
        return True


def _window_vector(x: CoordVector, d: int) -> np.ndarray:
    if x.max_index > d:
        raise DimensionMismatch(f"vector support reaches {x.max_index} beyond the window [1, {d}]")
    return x.to_dense(d)


def _truncations(tup: OperatorTuple, d: int) -> list[np.ndarray]:
    return [m.truncate(d) for m in tup.members]


@dataclass
class _Orbit:
    vectors: list[np.ndarray]
    depths: list[int]
    basis: _OrthoBasis
    saturated: bool
    applications: int


def _grow_orbit(mats: list[np.ndarray], seed: np.ndarray, params: OrbitGenParams, workers: int = 1) -> _Orbit:
    ob = _OrthoBasis(len(seed), params.rank_tol)
    nrm = np.linalg.norm(seed)
    if nrm == 0:
        raise InvalidSeed("orbit seed is zero")
    frontier = [seed / nrm]
    vectors, depths = [], []
    applications = 0
    saturated = False

    def expand(vs):
        return [M @ v for v in vs for M in mats]

    for m in range(1, params.depth + 1):
        need = len(frontier) * len(mats)
        if applications + need > params.budget:
            partial = _Orbit(vectors, depths, ob, False, applications)
            raise BudgetExceeded(f"orbit depth {m} exceeds budget {params.budget}",
                                 deepest=m - 1, partial=partial)
        applications += need
        new = []
        for c in _ordered_map(expand, frontier, workers):
            if ob.add(c):
                c = c / np.linalg.norm(c)
                new.append(c)
                vectors.append(c)
                depths.append(m)
        if not new:
            saturated = True
            break
        frontier = new
    return _Orbit(vectors, depths, ob, saturated, applications)


def orbit_vectors(tup: OperatorTuple, seed: CoordVector, params: OrbitGenParams,
                  workers: int = 1) -> list[CoordVector]:
    """Unit vectors spanning ``span{T_w seed : 1 <= |w| <= depth}`` on the window.

    Generation is breadth-first (depth, then frontier order, then member
    index).  On :class:`BudgetExceeded` the vectors kept so far are attached
    as ``partial``.
    """
    d = params.truncation_dim
    mats = _truncations(tup, d)
    try:
        orb = _grow_orbit(mats, _window_vector(seed, d), params, workers)
    except BudgetExceeded as exc:
        exc.partial = [CoordVector.from_dense(v) for v in exc.partial.vectors]
        raise
    return [CoordVector.from_dense(v) for v in orb.vectors]


def span_basis(vectors: Sequence[CoordVector], rank_tol: float, truncation_dim: int) -> list[CoordVector]:
    """Orthonormal basis of the span; vectors with relative residual <= rank_tol are dropped."""
    ob = _OrthoBasis(truncation_dim, rank_tol)
    for v in vectors:
        ob.add(_window_vector(v, truncation_dim))
    return [CoordVector.from_dense(q) for q in ob.q]


def projection_vanishing_check(tup: OperatorTuple, k: int, depth: int, budget: int = 1 << 22,
                               workers: int = 1) -> float:
    """``max |f_k(T_w e_k)|`` over every word ``w`` with ``1 <= |w| <= depth``.

    Exhaustive (no pruning) and exact on banded members; words that
    annihilate ``e_k`` are dropped from the frontier.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    members = tup.members

    def expand(vs):
        out = []
        for v in vs:
            for T in members:
                y = T.apply(v)
                if not y.is_zero():
                    out.append(y)
        return out

    frontier = [basis_vector(k)]
    worst = 0.0
    applications = 0
    for m in range(1, depth + 1):
        need = len(frontier) * len(members)
        if applications + need > budget:
            raise BudgetExceeded(f"vanishing check at depth {m} exceeds budget {budget}",
                                 deepest=m - 1, partial=worst)
        applications += need
        frontier = _ordered_map(expand, frontier, workers)
        if not frontier:
            break
        worst = max(worst, max(abs(v[k]) for v in frontier))
    return worst


def _residuals(mats: list[np.ndarray], Q: np.ndarray, interior: int) -> tuple[float, ...]:
    out = []
    P = Q @ Q.conj().T
    for M in mats:
        worst = 0.0
        for c in range(interior):
            img = M @ Q[:, c]
            worst = max(worst, float(np.linalg.norm(img - P @ img)))
        out.append(worst)
    return tuple(out)


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def _kernel_from_mats(mats: list[np.ndarray], d: int, rank_tol: float, flags=()) -> SubspaceResult:
    stacked = np.vstack(mats)
    _, s, vh = np.linalg.svd(stacked)
    largest = s[0] if s.size else 0.0
    if largest == 0:
        null = list(range(d))
    else:
        null = [i for i in range(d) if i >= s.size or s[i] <= rank_tol * largest]
    if largest == 0:
        vecs = [np.eye(d, dtype=complex)[:, i] for i in range(d)]
    else:
        vecs = [_canonical_phase(vh[i].conj()) for i in null]
    dim = len(vecs)
    Q = np.column_stack(vecs) if vecs else np.zeros((d, 0), dtype=complex)
    res = _residuals(mats, Q, dim)
    checks = SubspaceChecks(None, res, dim, d, 1 <= dim < d, dim, True)
    basis = tuple(CoordVector.from_dense(v) for v in vecs)
    result = SubspaceResult("kernel", basis, None, checks, flags=tuple(flags))
    if dim:
        J, is_ideal = ideal_support(result, rank_tol)
        result = SubspaceResult("kernel", basis, None, checks, J, is_ideal, tuple(flags))
    return result


def kernel_intersection(tup: OperatorTuple, truncation_dim: int, rank_tol: float = 1e-10) -> SubspaceResult:
    """Numerical ``ker T_1 ∩ ... ∩ ker T_N`` of the window truncations.

    Directions whose singular value in the stacked matrix is at most
    ``rank_tol`` times the largest count as null.
    """
    return _kernel_from_mats(_truncations(tup, truncation_dim), truncation_dim, rank_tol)


def ideal_support(result: SubspaceResult, tol: float = 1e-10) -> tuple[tuple[int, ...], bool]:
    """Union ``J`` of basis supports and whether the span equals ``span{e_j : j in J}``."""
    if not result.basis:
        raise ValueError("ideal_support needs at least one basis vector")
    J = sorted({k for q in result.basis for k, v in q if abs(v) > tol})
    P = result.projector()
    d = result.checks.truncation_dim
    is_ideal = True
    for j in J:
        e = np.zeros(d, dtype=complex)
        e[j - 1] = 1.0
        if np.linalg.norm(e - P @ e) > tol:
            is_ideal = False
            break
    return tuple(J), is_ideal


def _check_hypotheses(tup: OperatorTuple, y0: CoordVector, params: OrbitGenParams,
                      verdict: QnilVerdict | None):
    if verdict is not None and verdict.status == REFUTED:
        raise HypothesisRefuted(f"supplied verdict is refuted (witness {verdict.witness})")
    if y0.is_zero():
        raise InvalidSeed("y0 must be nonzero")
    if not in_cone(y0, params.rank_tol).in_cone:
        raise InvalidSeed("y0 is not in the positive cone")
    for i, m in enumerate(tup.members, start=1):
        pv = is_positive(m, params.truncation_dim, 0.0)
        if not pv.positive:
            raise NotPositive(i, pv.witness)


def _window_leak(tup: OperatorTuple, Q: np.ndarray, interior: int, d: int) -> float:
    worst = 0.0
    for c in range(interior):
        q = CoordVector.from_dense(Q[:, c])
        for m in tup.members:
            img = m.apply(q)
            outside = [abs(v) for k, v in img if k > d]
            if outside:
                worst = max(worst, math.hypot(*outside))
    return worst


def common_invariant_subspace(tup: OperatorTuple, y0: CoordVector, params: OrbitGenParams,
                              verdict: QnilVerdict | None = None, workers: int = 1) -> SubspaceResult:
    """Build the orbit subspace ``Y = span{T_w e_k}`` for a positive tuple.

    If every ``T_i y0`` vanishes the common kernel is returned instead.
    Otherwise ``k`` is the smallest index with ``f_k(y0) > 0`` such that some
    ``T_i e_k`` is nonzero; later support indices of ``y0`` are tried only
    when the first one is annihilated by every member (flag
    ``anchor-shifted``).  If none qualifies, the windowed common kernel is
    returned with flag ``degenerate-orbit``.

    The checks record ``max |f_k|`` over the basis (which must vanish for
    positive, jointly quasinilpotent tuples), per-member invariance
    residuals on the interior, and nontriviality ``1 <= dim < d``.
    """
    _check_hypotheses(tup, y0, params, verdict)
    d = params.truncation_dim
    tol = params.rank_tol
    scale = vec_norm(y0)
    if all(vec_norm(m.apply(y0)) <= tol * scale for m in tup.members):
        return kernel_intersection(tup, d, tol)

    mats = _truncations(tup, d)
    first = dominating_coordinate(y0, tol)
    anchors = [k for k, v in y0 if v.real > tol]
    k = None
    for cand in anchors:
        e = basis_vector(cand)
        if any(vec_norm(m.apply(e)) > tol for m in tup.members):
            k = cand
            break
    if k is None:
        return _kernel_from_mats(mats, d, tol, flags=("degenerate-orbit",))
    flags = ("anchor-shifted",) if k != first else ()

    orb = _grow_orbit(mats, _window_vector(basis_vector(k), d), params, workers)
    basis = span_basis([CoordVector.from_dense(v) for v in orb.vectors], tol, d)
    dim = len(basis)
    Q = np.column_stack([q.to_dense(d) for q in basis]) if basis else np.zeros((d, 0), dtype=complex)
    interior = dim if orb.saturated else sum(1 for m in orb.depths if m < params.depth)
    fk = max((abs(q[k]) for q in basis), default=0.0)
    checks = SubspaceChecks(
        fk_vanishing_max=float(fk),
        invariance_residuals=_residuals(mats, Q, interior),
        dimension=dim,
        truncation_dim=d,
        nontrivial=1 <= dim < d,
        interior_dim=interior,
        saturated=orb.saturated,
        window_leak=_window_leak(tup, Q, interior, d),
    )
    result = SubspaceResult("orbit", tuple(basis), k, checks, flags=flags)
    if basis:
        J, is_ideal = ideal_support(result, tol)
        result = SubspaceResult("orbit", tuple(basis), k, checks, J, is_ideal, flags)
    return result


@dataclass(frozen=True)
class CommutantCheck:
    commute_residual: float
    positive: bool
    invariance_residual: float

    def to_json(self):
        return {"commute_residual": self.commute_residual, "positive": self.positive,
                "invariance_residual": self.invariance_residual}


def commutant_invariance(result: SubspaceResult, A: Operator, tup: OperatorTuple,
                         tol: float = 1e-10) -> CommutantCheck:
    """How far ``A`` is from commuting with the tuple, and whether it preserves ``result``.

    Positive operators commuting with every member must leave the orbit
    subspace invariant; for other ``A`` the residual is diagnostic only.
    The residual uses the interior columns, which sit one generation inside
    the orbit frontier; an ``A`` reaching further than one member step can
    show window leakage of the size of the dropped orbit terms.
    """
    d = result.checks.truncation_dim
    Ad = A.truncate(d)
    comm = 0.0
    for M in _truncations(tup, d):
        C = Ad @ M - M @ Ad
        comm = max(comm, float(np.max(np.linalg.norm(C, axis=0))) if d else 0.0)
    Q = result.matrix()
    inv = _residuals([Ad], Q, result.checks.interior_dim)[0] if result.basis else 0.0
    return CommutantCheck(comm, is_positive(A, d, tol).positive, inv)


@dataclass(frozen=True)
class WeightedResult:
    subspace: SubspaceResult
    b_residuals: tuple[float, ...]

    def to_json(self):
        return {"subspace": self.subspace.to_json(), "b_residuals": list(self.b_residuals)}

    @classmethod
    def from_json(cls, d):
        return cls(SubspaceResult.from_json(d["subspace"]), tuple(d["b_residuals"]))


def _reach_layers(mats: list[np.ndarray], start: int, depth: int) -> tuple[list[int], list[int], bool]:
    """Indices reachable from ``start`` in 1..depth steps of the joint zero pattern.

    Returns (indices in first-reach order, their first-reach depths, saturated).
    """
    pattern = np.zeros(mats[0].shape, dtype=bool)
    for M in mats:
        pattern |= M != 0
    seen: dict[int, int] = {}
    layer = {start}
    saturated = False
    for m in range(1, depth + 1):
        nxt = set()
        for j in sorted(layer):
            nxt.update(int(i) + 1 for i in np.flatnonzero(pattern[:, j - 1]))
        fresh = sorted(i for i in nxt if i not in seen)
        for i in fresh:
            seen[i] = m
        if not fresh and nxt <= set(seen):
            saturated = True
            break
        layer = nxt
    order = sorted(seen, key=lambda i: (seen[i], i))
    return order, [seen[i] for i in order], saturated


def _weighted(A_tuple: OperatorTuple, B_mats: list[np.ndarray], y0: CoordVector, params: OrbitGenParams,
              verdict: QnilVerdict | None) -> WeightedResult:
    _check_hypotheses(A_tuple, y0, params, verdict)
    d = params.truncation_dim
    tol = params.rank_tol
    A_mats = _truncations(A_tuple, d)
    l = dominating_coordinate(y0, tol)
    e_l = basis_vector(l)
    if all(vec_norm(m.apply(e_l)) <= tol for m in A_tuple.members):
        sub = _kernel_from_mats(B_mats, d, tol)
        return WeightedResult(sub, sub.checks.invariance_residuals)

    J, depths, saturated = _reach_layers(A_mats, l, params.depth)
    interior = len(J) if saturated else sum(1 for m in depths if m < params.depth)
    eye = np.eye(d, dtype=complex)
    Q = eye[:, [j - 1 for j in J]] if J else np.zeros((d, 0), dtype=complex)
    basis = tuple(basis_vector(j) for j in J)
    checks = SubspaceChecks(
        fk_vanishing_max=1.0 if l in J else 0.0,
        invariance_residuals=_residuals(A_mats, Q, interior),
        dimension=len(J),
        truncation_dim=d,
        nontrivial=1 <= len(J) < d,
        interior_dim=interior,
        saturated=saturated,
    )
    sub = SubspaceResult("orbit", basis, l, checks, tuple(sorted(J)) if J else None, True if J else None)
    return WeightedResult(sub, _residuals(B_mats, Q, interior))


def weighted_invariant_subspace(A_tuple: OperatorTuple, weights: Sequence, y0: CoordVector,
                                params: OrbitGenParams, verdict: QnilVerdict | None = None) -> WeightedResult:
    """Common invariant subspace for ``B_k = (w^k_ij a^k_ij)`` built from the positive ``A_k``.

    The subspace is the coordinate ideal ``span{e_j : j in J}`` where ``J``
    collects the supports of ``A_w e_l`` over words of length ``1..depth``;
    every operator dominated by a word product (each rank-one piece in
    particular) maps ``e_l`` into it, so any weighting of the ``A_k`` does
    too.  ``b_residuals`` are the interior invariance residuals of the
    ``B_k`` on the window.
    """
    d = params.truncation_dim
    if len(weights) != len(A_tuple):
        raise DimensionMismatch(f"{len(weights)} weight matrices for {len(A_tuple)} operators")
    B_mats = []
    for A, W in zip(A_tuple.members, weights):
        W = np.asarray(W, dtype=complex)
        if W.shape != (d, d):
            raise DimensionMismatch(f"weight matrix has shape {W.shape}, expected {(d, d)}")
        B_mats.append(W * A.truncate(d))
    return _weighted(A_tuple, B_mats, y0, params, verdict)


def corollary_subspace(A_tuple: OperatorTuple, T_tuple: OperatorTuple, y0: CoordVector,
                       params: OrbitGenParams, verdict: QnilVerdict | None = None,
                       tol: float = 0.0) -> WeightedResult:
    """Invariant subspace for ``T_k`` whose zero pattern contains that of ``A_k``.

    Raises :class:`ZeroPatternViolation` (with ``member`` set) when some
    ``t_ij`` is nonzero where ``a_ij`` vanishes.
    """
    if len(A_tuple) != len(T_tuple):
        raise DimensionMismatch("A and T tuples differ in length")
    d = params.truncation_dim
    for idx, (A, T) in enumerate(zip(A_tuple.members, T_tuple.members), start=1):
        try:
            derive_weights(A, T, d, tol)
        except ZeroPatternViolation as exc:
            exc.member = idx
            raise
    return _weighted(A_tuple, _truncations(T_tuple, d), y0, params, verdict)
