"""Finitely supported coordinate vectors relative to a fixed Schauder basis.

Indices are 1-based, matching ``e_1, e_2, ...``.  Scalars are complex
throughout; the positive cone is the set of vectors whose coordinates are
all real and nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import NoPositiveCoordinate

__all__ = [
    "CoordVector",
    "ConeVerdict",
    "basis_vector",
    "vec_norm",
    "coord_functional",
    "in_cone",
    "dominating_coordinate",
    "NORM_KINDS",
]

NORM_KINDS = ("one", "two", "sup")


class CoordVector:
    """Immutable sparse vector ``sum_j c_j e_j``; exact zeros are never stored."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[int, complex] | Iterable[tuple[int, complex]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        clean: dict[int, complex] = {}
        for idx, val in items:
            if isinstance(idx, bool) or int(idx) != idx or idx < 1:
                raise ValueError(f"basis index must be a positive integer, got {idx!r}")
            val = complex(val)
            if val != 0:
                clean[int(idx)] = val
        object.__setattr__(self, "_entries", clean)

    @classmethod
    def _trusted(cls, entries: dict[int, complex]) -> "CoordVector":
        # caller guarantees valid indices, complex values and no zeros
        obj = object.__new__(cls)
        object.__setattr__(obj, "_entries", entries)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("CoordVector is immutable")

    @property
    def entries(self) -> Mapping[int, complex]:
        return MappingProxyType(self._entries)

    def support(self) -> list[int]:
        return sorted(self._entries)

    @property
    def max_index(self) -> int:
        return max(self._entries, default=0)

    def is_zero(self) -> bool:
        return not self._entries

    def __getitem__(self, k: int) -> complex:
        return self._entries.get(k, 0j)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries.items()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoordVector):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(frozenset(self._entries.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v!r}" for k, v in self)
        return f"CoordVector({{{body}}})"

    def __add__(self, other: "CoordVector") -> "CoordVector":
        if not isinstance(other, CoordVector):
            return NotImplemented
        out = dict(self._entries)
        for k, v in other._entries.items():
            s = out.get(k, 0j) + v
            if s == 0:
                out.pop(k, None)
            else:
                out[k] = s
        return CoordVector._trusted(out)

    def __neg__(self) -> "CoordVector":
        return CoordVector._trusted({k: -v for k, v in self._entries.items()})

    def __sub__(self, other: "CoordVector") -> "CoordVector":
        if not isinstance(other, CoordVector):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar) -> "CoordVector":
        scalar = complex(scalar)
        if scalar == 0:
            return CoordVector._trusted({})
        out = {}
        for k, v in self._entries.items():
            p = v * scalar
            if p != 0:
                out[k] = p
        return CoordVector._trusted(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "CoordVector":
        scalar = complex(scalar)
        out = {}
        for k, v in self._entries.items():
            q = v / scalar
            if q != 0:
                out[k] = q
        return CoordVector._trusted(out)

    def to_dense(self, d: int) -> np.ndarray:
        """Dense complex array on the window ``[1, d]``; entries beyond ``d`` are dropped."""
        out = np.zeros(d, dtype=complex)
        for k, v in self._entries.items():
            if k <= d:
                out[k - 1] = v
        return out

    @classmethod
    def from_dense(cls, arr) -> "CoordVector":
        arr = np.asarray(arr, dtype=complex).ravel()
        nz = np.flatnonzero(arr)
        return cls._trusted({int(i) + 1: complex(arr[i]) for i in nz})

    def to_json(self) -> list[dict]:
        return [{"index": k, "re": v.real, "im": v.imag} for k, v in self]

    @classmethod
    def from_json(cls, items: list[dict]) -> "CoordVector":
        acc: dict[int, complex] = {}
        for it in items:
            k = it["index"]
            acc[k] = acc.get(k, 0j) + complex(it.get("re", 0.0), it.get("im", 0.0))
        return cls(acc)


def basis_vector(k: int, scale: complex = 1.0) -> CoordVector:
    return CoordVector({k: scale})


def vec_norm(x: CoordVector, p: str = "two") -> float:
    """l_p norm of the coordinate sequence, ``p`` in ``{"one", "two", "sup"}``.

    ``math.hypot`` is used for ``two`` because it rescales internally, so
    vectors with entries near the underflow threshold keep a nonzero norm.
    """
    mags = [abs(v) for v in x._entries.values()]
    if not mags:
        return 0.0
    if p == "two":
        return math.hypot(*mags)
    if p == "one":
        return math.fsum(mags)
    if p == "sup":
        return max(mags)
    raise ValueError(f"unknown norm kind {p!r}; expected one of {NORM_KINDS}")


def coord_functional(k: int, x: CoordVector) -> complex:
    """The coefficient functional ``f_k``: the k-th coordinate of ``x``."""
    if k < 1:
        raise ValueError("basis index must be >= 1")
    return x[k]


@dataclass(frozen=True)
class ConeVerdict:
    in_cone: bool
    worst_violation: float


def in_cone(x: CoordVector, tol: float = 0.0) -> ConeVerdict:
    """Membership in ``{sum t_j e_j : t_j >= 0}`` up to ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    worst = 0.0
    for v in x._entries.values():
        worst = max(worst, -v.real, abs(v.imag))
    return ConeVerdict(worst <= tol, worst)


def dominating_coordinate(y0: CoordVector, tol: float = 0.0) -> int:
    """Smallest ``k`` with ``Re f_k(y0) > tol``.

    After rescaling ``y0`` by ``1/f_k(y0)`` the basis vector ``e_k`` sits
    below it in the cone order.
    """
    for k, v in y0:
        if v.real > tol:
            return k
    raise NoPositiveCoordinate(f"no coordinate of y0 exceeds tolerance {tol}")
