"""Linear operators on sequence spaces, in Schauder-basis coordinates.

Two evaluation regimes coexist.  Banded oracles (shifts, identity, and
structural combinations of them) act exactly on finitely supported vectors,
so operators on infinite-dimensional spaces never need truncating.  Finite
matrices are d x d truncations with ``d`` explicit.  Matrix entries follow
the usual convention ``T e_j = sum_i a_ij e_i`` (row ``i``, column ``j``).

Composition is structural: ``compose(S, T)`` applies ``T`` first and never
forms a product matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .coordspace import CoordVector, basis_vector
from .errors import DimensionMismatch, SupportOverflow, ZeroPatternViolation

__all__ = [
    "DEFAULT_MAX_INDEX",
    "WeightSpec",
    "Operator",
    "BandedOperator",
    "ShiftOperator",
    "MatrixOperator",
    "SumOperator",
    "ScaledOperator",
    "CompositionOperator",
    "RankOnePiece",
    "OperatorTuple",
    "PositivityVerdict",
    "apply",
    "identity",
    "zero_operator",
    "matrix",
    "compose",
    "op_sum",
    "scaled",
    "make_forward_shift",
    "make_backward_shift",
    "paper_pair",
    "is_positive",
    "rank_one_piece",
    "weighted_operator",
    "derive_weights",
]

DEFAULT_MAX_INDEX = 10**6


@dataclass(frozen=True)
class WeightSpec:
    """Weight sequence ``w(n)``, ``n >= 1``, for weighted shifts.

    ``type`` is one of ``reciprocal`` (1/n), ``reciprocal-factorial``
    (1/n!), ``geometric`` (value**n), ``explicit`` (value[n-1], zero past the
    end of the list) or ``constant`` (value).
    """

    type: str
    value: Any = None

    TYPES = ("reciprocal", "reciprocal-factorial", "geometric", "explicit", "constant")

    def __post_init__(self):
        if self.type not in self.TYPES:
            raise ValueError(f"unknown weight type {self.type!r}")
        if self.type == "explicit":
            vals = tuple(complex(v) for v in self.value)
            if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in vals):
                raise ValueError("explicit weights must be finite")
            object.__setattr__(self, "value", vals)
        elif self.type in ("geometric", "constant"):
            v = complex(self.value)
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError("weight parameter must be finite")

    @classmethod
    def reciprocal(cls):
        return cls("reciprocal")

    @classmethod
    def reciprocal_factorial(cls):
        return cls("reciprocal-factorial")

    @classmethod
    def geometric(cls, ratio):
        return cls("geometric", ratio)

    @classmethod
    def explicit(cls, values):
        return cls("explicit", values)

    @classmethod
    def constant(cls, c):
        return cls("constant", c)

    def __call__(self, n: int) -> complex:
        t = self.type
        if t == "reciprocal":
            return complex(1.0 / n)
        if t == "reciprocal-factorial":
            # exp(-lgamma) stays accurate where 1/n! itself would need a huge int
            return complex(math.exp(-math.lgamma(n + 1)))
        if t == "geometric":
            r = self.value
            if isinstance(r, (int, float)):
                return complex(float(r) ** n)
            return complex(r) ** n
        if t == "explicit":
            return self.value[n - 1] if n <= len(self.value) else 0j
        return complex(self.value)

    def to_json(self) -> dict:
        if self.type == "geometric":
            return {"type": "geometric", "ratio": _scalar_json(self.value)}
        if self.type == "constant":
            return {"type": "constant", "value": _scalar_json(self.value)}
        if self.type == "explicit":
            return {"type": "explicit", "values": [_scalar_json(v) for v in self.value]}
        return {"type": self.type}


def _scalar_json(v):
    v = complex(v)
    return v.real if v.imag == 0 else [v.real, v.imag]


class Operator:
    """Base class.  Subclasses implement :meth:`apply` and :meth:`bandwidth`."""

    kind = "abstract"
    name: str | None = None

    def apply(self, x: CoordVector) -> CoordVector:
        raise NotImplementedError

    def bandwidth(self) -> tuple[int | None, int | None]:
        """(lower, upper): entries vanish when ``i - j > lower`` or ``j - i > upper``."""
        return (None, None)

    def column(self, j: int) -> CoordVector:
        return self.apply(basis_vector(j))

    def entry(self, i: int, j: int) -> complex:
        return self.column(j)[i]

    def truncate(self, d: int) -> np.ndarray:
        """The window ``P_d T P_d`` as a dense ``d x d`` complex array."""
        out = np.zeros((d, d), dtype=complex)
        for j in range(1, d + 1):
            for i, v in self.column(j):
                if i <= d:
                    out[i - 1, j - 1] = v
        return out

    def __call__(self, x: CoordVector) -> CoordVector:
        return self.apply(x)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<{type(self).__name__}{label}>"


class BandedOperator(Operator):
    """Entry oracle ``(i, j) -> a_ij`` with finite lower/upper bandwidth."""

    kind = "banded-oracle"

    def __init__(self, entry_fn: Callable[[int, int], complex], lower: int, upper: int,
                 name: str | None = None, max_index: int = DEFAULT_MAX_INDEX):
        if lower < 0 or upper < 0:
            raise ValueError("bandwidths must be nonnegative")
        self._entry_fn = entry_fn
        self.lower = int(lower)
        self.upper = int(upper)
        self.name = name
        self.max_index = max_index

    def bandwidth(self):
        return (self.lower, self.upper)

    def entry(self, i: int, j: int) -> complex:
        if i < 1 or j < 1 or i - j > self.lower or j - i > self.upper:
            return 0j
        return complex(self._entry_fn(i, j))

    def apply(self, x: CoordVector) -> CoordVector:
        out: dict[int, complex] = {}
        for j, v in x._entries.items():
            for i in range(max(1, j - self.upper), j + self.lower + 1):
                a = self.entry(i, j)
                if a != 0:
                    if i > self.max_index:
                        raise SupportOverflow(i, self.max_index)
                    out[i] = out.get(i, 0j) + a * v
        return CoordVector._trusted({k: v for k, v in out.items() if v != 0})


class ShiftOperator(BandedOperator):
    """Weighted shift ``T e_n = w(n) e_{n+step}`` with ``step`` in ``{+1, -1}``.

    For the backward shift ``T e_1 = 0``.
    """

    def __init__(self, weight: WeightSpec, step: int, name: str | None = None,
                 max_index: int = DEFAULT_MAX_INDEX):
        if step not in (1, -1):
            raise ValueError("step must be +1 or -1")
        self.weight = weight
        self.step = step
        lower, upper = (1, 0) if step == 1 else (0, 1)
        super().__init__(self._shift_entry, lower, upper, name=name, max_index=max_index)

    def _shift_entry(self, i, j):
        if i - j == self.step:
            return self.weight(j)
        return 0j

    def apply(self, x: CoordVector) -> CoordVector:
        out: dict[int, complex] = {}
        step = self.step
        for j, v in x._entries.items():
            i = j + step
            if i < 1:
                continue
            p = self.weight(j) * v
            if p != 0:
                if i > self.max_index:
                    raise SupportOverflow(i, self.max_index)
                out[i] = p
        return CoordVector._trusted(out)


class _Identity(BandedOperator):
    def __init__(self, name="I"):
        super().__init__(lambda i, j: 1.0, 0, 0, name=name)

    def apply(self, x):
        return x


class MatrixOperator(Operator):
    """A finite ``d x d`` complex matrix acting on vectors supported in ``[1, d]``."""

    kind = "finite-matrix"

    def __init__(self, entries, name: str | None = None):
        arr = np.array(entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise DimensionMismatch(f"finite matrix must be square with d >= 1, got shape {arr.shape}")
        arr.setflags(write=False)
        self.matrix = arr
        self.dim = arr.shape[0]
        self.name = name

    def bandwidth(self):
        return (self.dim - 1, self.dim - 1)

    def entry(self, i, j):
        if 1 <= i <= self.dim and 1 <= j <= self.dim:
            return complex(self.matrix[i - 1, j - 1])
        return 0j

    def apply(self, x: CoordVector) -> CoordVector:
        if x.max_index > self.dim:
            raise DimensionMismatch(f"vector support reaches {x.max_index} > matrix dimension {self.dim}")
        if x.is_zero():
            return x
        idx = np.fromiter(x._entries.keys(), dtype=int) - 1
        vals = np.fromiter(x._entries.values(), dtype=complex)
        return CoordVector.from_dense(self.matrix[:, idx] @ vals)

    def truncate(self, d):
        if d > self.dim:
            raise DimensionMismatch(f"cannot truncate a {self.dim}-dimensional matrix to {d}")
        return np.array(self.matrix[:d, :d])


class SumOperator(Operator):
    kind = "sum"

    def __init__(self, terms: Sequence[Operator], name=None):
        if not terms:
            raise ValueError("sum needs at least one term")
        self.terms = tuple(terms)
        self.name = name

    def bandwidth(self):
        bands = [t.bandwidth() for t in self.terms]
        lo = None if any(b[0] is None for b in bands) else max(b[0] for b in bands)
        up = None if any(b[1] is None for b in bands) else max(b[1] for b in bands)
        return (lo, up)

    def apply(self, x):
        acc = self.terms[0].apply(x)
        for t in self.terms[1:]:
            acc = acc + t.apply(x)
        return acc


class ScaledOperator(Operator):
    kind = "scaled"

    def __init__(self, factor, op: Operator, name=None):
        self.factor = complex(factor)
        self.op = op
        self.name = name

    def bandwidth(self):
        return self.op.bandwidth()

    def apply(self, x):
        return self.op.apply(x) * self.factor


class CompositionOperator(Operator):
    """``factors[0] @ factors[1] @ ...``; the rightmost factor acts first."""

    kind = "composition"

    def __init__(self, factors: Sequence[Operator], name=None):
        if not factors:
            raise ValueError("composition needs at least one factor")
        self.factors = tuple(factors)
        self.name = name

    def bandwidth(self):
        bands = [f.bandwidth() for f in self.factors]
        lo = None if any(b[0] is None for b in bands) else sum(b[0] for b in bands)
        up = None if any(b[1] is None for b in bands) else sum(b[1] for b in bands)
        return (lo, up)

    def apply(self, x):
        for f in reversed(self.factors):
            x = f.apply(x)
        return x


class RankOnePiece(Operator):
    """Sends ``e_j`` to ``value * e_i`` and every other basis vector to zero."""

    kind = "rank-one-piece"

    def __init__(self, i: int, j: int, value: complex, name=None):
        self.i, self.j, self.value = int(i), int(j), complex(value)
        self.name = name

    def bandwidth(self):
        return (max(self.i - self.j, 0), max(self.j - self.i, 0))

    def apply(self, x):
        c = x[self.j] * self.value
        return CoordVector._trusted({self.i: c} if c != 0 else {})


def apply(T: Operator, x: CoordVector) -> CoordVector:
    return T.apply(x)


def identity(name="I") -> Operator:
    return _Identity(name)


def zero_operator(name="0") -> Operator:
    return ShiftOperator(WeightSpec.constant(0), 1, name=name)


def matrix(entries, name=None) -> MatrixOperator:
    return MatrixOperator(entries, name=name)


def compose(*ops: Operator, name=None) -> Operator:
    return CompositionOperator(ops, name=name)


def op_sum(*ops: Operator, name=None) -> Operator:
    return SumOperator(ops, name=name)


def scaled(factor, op: Operator, name=None) -> Operator:
    return ScaledOperator(factor, op, name=name)


def _as_weight(weight) -> WeightSpec:
    if isinstance(weight, WeightSpec):
        return weight
    if isinstance(weight, str):
        return WeightSpec(weight)
    kind, value = weight
    return WeightSpec(kind, value)


def make_forward_shift(weight, name=None, max_index=DEFAULT_MAX_INDEX) -> ShiftOperator:
    """``T e_n = w(n) e_{n+1}``; lower bandwidth 1, upper 0."""
    return ShiftOperator(_as_weight(weight), 1, name=name, max_index=max_index)


def make_backward_shift(weight, name=None, max_index=DEFAULT_MAX_INDEX) -> ShiftOperator:
    """``T e_n = w(n) e_{n-1}`` for ``n >= 2`` and ``T e_1 = 0``."""
    return ShiftOperator(_as_weight(weight), -1, name=name, max_index=max_index)


@dataclass(frozen=True)
class OperatorTuple:
    """Ordered tuple ``(T_1, ..., T_N)``.  Member ``i`` (1-based) is ``members[i-1]``."""

    members: tuple

    def __init__(self, members: Sequence[Operator]):
        members = tuple(members)
        if not members:
            raise ValueError("an operator tuple needs N >= 1 members")
        dims = {m.dim for m in members if isinstance(m, MatrixOperator)}
        if len(dims) > 1:
            raise DimensionMismatch(f"finite-matrix members disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "members", members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def member(self, i: int) -> Operator:
        return self.members[i - 1]

    def word_operator(self, word: Sequence[int]) -> Operator:
        """Structural product ``T_{w_1} ... T_{w_n}`` (``w_n`` acts first)."""
        return compose(*(self.member(i) for i in word))

    def apply_word(self, word: Sequence[int], x: CoordVector) -> CoordVector:
        for i in reversed(word):
            x = self.members[i - 1].apply(x)
        return x

    @property
    def dim(self) -> int | None:
        for m in self.members:
            if isinstance(m, MatrixOperator):
                return m.dim
        return None


def paper_pair() -> OperatorTuple:
    """``T_1 e_n = e_{n-1}`` (``T_1 e_1 = 0``) and ``T_2 e_n = (1/n) e_{n+1}`` on l_2."""
    t1 = make_backward_shift(WeightSpec.constant(1), name="T1")
    t2 = make_forward_shift(WeightSpec.reciprocal(), name="T2")
    return OperatorTuple([t1, t2])


@dataclass(frozen=True)
class PositivityVerdict:
    positive: bool
    witness: tuple[int, int, complex] | None
    probe_dimension: int


def is_positive(T: Operator, probe_dim: int, tol: float = 0.0) -> PositivityVerdict:
    """Entrywise check of columns ``1..probe_dim`` (every row those columns reach)."""
    if probe_dim < 1:
        raise ValueError("probe_dim must be >= 1")
    ncols = min(probe_dim, T.dim) if isinstance(T, MatrixOperator) else probe_dim
    for j in range(1, ncols + 1):
        for i, v in T.column(j):
            if v.real < -tol or abs(v.imag) > tol:
                return PositivityVerdict(False, (i, j, v), probe_dim)
    return PositivityVerdict(True, None, probe_dim)


def rank_one_piece(A: Operator, i: int, j: int, probe_dim: int) -> RankOnePiece:
    """The piece of ``A`` carried by entry ``(i, j)``: ``e_j -> a_ij e_i``."""
    if not (1 <= i <= probe_dim and 1 <= j <= probe_dim):
        raise ValueError(f"({i}, {j}) lies outside the probe window [1, {probe_dim}]")
    return RankOnePiece(i, j, A.entry(i, j))


def weighted_operator(A: Operator, W, d: int, name=None) -> MatrixOperator:
    """Finite matrix with entries ``w_ij * a_ij`` on the window ``[1, d]``."""
    W = np.asarray(W, dtype=complex)
    if W.shape != (d, d):
        raise DimensionMismatch(f"weight matrix has shape {W.shape}, expected {(d, d)}")
    return MatrixOperator(W * A.truncate(d), name=name)


def derive_weights(A: Operator, T: Operator, d: int, tol: float = 0.0) -> np.ndarray:
    """Weights ``w_ij = t_ij / a_ij`` realising ``T`` as a weighting of ``A``.

    Raises :class:`ZeroPatternViolation` at the first (row-major) entry where
    ``a_ij`` vanishes but ``t_ij`` does not.
    """
    a = A.truncate(d)
    t = T.truncate(d)
    support = np.abs(a) > tol
    bad = ~support & (np.abs(t) > tol)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ZeroPatternViolation(int(i) + 1, int(j) + 1)
    W = np.zeros((d, d), dtype=complex)
    W[support] = t[support] / a[support]
    return W
