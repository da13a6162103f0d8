"""Scenario files: JSON description of operators, the tuple, vectors and parameters.

Example::

    {
      "name": "geometric-shifts",
      "operators": [
        {"name": "S1", "kind": "forward_shift", "weight": {"type": "geometric", "ratio": 0.5}},
        {"name": "S2", "kind": "forward_shift", "weight": {"type": "geometric", "ratio": 0.3333333333333333}}
      ],
      "tuple": ["S1", "S2"],
      "vectors": {"e1": [{"index": 1, "re": 1.0, "im": 0.0}]},
      "params": {"dim": 16, "depth": 12, "tol": 1e-10}
    }
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coordspace import CoordVector
from .errors import DanglingReference, ParseError, UnknownOperatorKind
from .operators import (
    Operator,
    OperatorTuple,
    WeightSpec,
    compose,
    identity,
    make_backward_shift,
    make_forward_shift,
    matrix,
    op_sum,
    scaled,
    zero_operator,
)
from .quasinil import DEFAULT_BUDGET

__all__ = ["Scenario", "parse_scenario", "load_scenario", "BUILTINS", "DEFAULT_PARAMS", "default_params"]

TOP_KEYS = {"name", "description", "operators", "tuple", "vectors", "params", "weighted"}

DEFAULT_PARAMS = {
    "depth": 12,
    "dim": 16,
    "tol": 1e-10,
    "budget": DEFAULT_BUDGET,
    "strategy": "pruned",
    "seed": 0,
    "n_max": 50,
    "threshold": 1e-3,
    "workers": 1,
    "norm": "two",
    "mode": "uniform",
    "count": 32,
    "anchor": None,
    "jsr_depth": 6,
}

OPERATOR_FIELDS = {
    "forward_shift": {"weight"},
    "backward_shift": {"weight"},
    "matrix": {"dim", "entries"},
    "paper_t1": set(),
    "paper_t2": set(),
    "identity": set(),
    "zero": set(),
    "sum": {"of"},
    "compose": {"of"},
    "scaled": {"factor", "of"},
}


def default_params() -> dict:
    p = dict(DEFAULT_PARAMS)
    env = os.environ.get("QNIL_BUDGET")
    if env:
        try:
            p["budget"] = int(env)
        except ValueError:
            raise ParseError(f"QNIL_BUDGET must be an integer, got {env!r}", "env") from None
    return p


@dataclass
class Scenario:
    name: str
    operators: dict[str, Operator]
    operator_specs: dict[str, dict]
    tuple_names: list[str]
    vectors: dict[str, CoordVector]
    params: dict
    weighted: dict | None = None
    digest: str = ""
    description: str = ""

    @property
    def tuple(self) -> OperatorTuple:
        return OperatorTuple([self.operators[n] for n in self.tuple_names])

    def resolve_names(self, names: list[str]) -> OperatorTuple:
        return OperatorTuple([self.operators[n] for n in names])


def _scalar(v, where: str) -> complex:
    if isinstance(v, bool):
        raise ParseError("expected a number", where)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise ParseError("expected a number or [re, im] pair", where)


def _weight(spec, where: str) -> WeightSpec:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ParseError("weight must be an object with a 'type'", where)
    t = spec["type"].replace("_", "-")
    allowed = {
        "reciprocal": {"type"},
        "reciprocal-factorial": {"type"},
        "geometric": {"type", "ratio"},
        "explicit": {"type", "values"},
        "constant": {"type", "value"},
    }
    if t not in allowed:
        raise ParseError(f"unknown weight type {spec['type']!r}", f"{where}.type")
    extra = set(spec) - allowed[t]
    if extra:
        raise ParseError(f"unknown fields {sorted(extra)}", where)
    missing = allowed[t] - set(spec)
    if missing:
        raise ParseError(f"missing fields {sorted(missing)}", where)
    if t == "geometric":
        return WeightSpec.geometric(_scalar(spec["ratio"], f"{where}.ratio").real
                                    if not isinstance(spec["ratio"], list)
                                    else _scalar(spec["ratio"], f"{where}.ratio"))
    if t == "constant":
        return WeightSpec.constant(_scalar(spec["value"], f"{where}.value"))
    if t == "explicit":
        vals = spec["values"]
        if not isinstance(vals, list):
            raise ParseError("values must be a list", f"{where}.values")
        return WeightSpec.explicit([_scalar(v, f"{where}.values[{i}]") for i, v in enumerate(vals)])
    return WeightSpec(t)


def _vector(items, where: str) -> CoordVector:
    if not isinstance(items, list):
        raise ParseError("vector must be a list of {index, re, im} objects", where)
    for i, it in enumerate(items):
        if not isinstance(it, dict) or "index" not in it:
            raise ParseError("entry needs an 'index'", f"{where}[{i}]")
        extra = set(it) - {"index", "re", "im"}
        if extra:
            raise ParseError(f"unknown fields {sorted(extra)}", f"{where}[{i}]")
        if not isinstance(it["index"], int) or isinstance(it["index"], bool) or it["index"] < 1:
            raise ParseError("index must be a positive integer", f"{where}[{i}].index")
    return CoordVector.from_json(items)


class _Builder:
    def __init__(self, specs: list):
        self.specs: dict[str, tuple[dict, str]] = {}
        for i, spec in enumerate(specs):
            where = f"$.operators[{i}]"
            if not isinstance(spec, dict):
                raise ParseError("operator spec must be an object", where)
            name = spec.get("name")
            if not isinstance(name, str) or not name:
                raise ParseError("operator needs a nonempty 'name'", where)
            if name in self.specs:
                raise ParseError(f"duplicate operator name {name!r}", where)
            kind = spec.get("kind")
            if kind not in OPERATOR_FIELDS:
                raise UnknownOperatorKind(f"unknown operator kind {kind!r}", f"{where}.kind")
            extra = set(spec) - {"name", "kind"} - OPERATOR_FIELDS[kind]
            if extra:
                raise ParseError(f"unknown fields {sorted(extra)}", where)
            missing = OPERATOR_FIELDS[kind] - set(spec)
            if missing:
                raise ParseError(f"missing fields {sorted(missing)}", where)
            self.specs[name] = (spec, where)
        self.built: dict[str, Operator] = {}
        self._visiting: set[str] = set()

    def get(self, name, where) -> Operator:
        if not isinstance(name, str) or name not in self.specs:
            raise DanglingReference(str(name), where)
        if name in self.built:
            return self.built[name]
        if name in self._visiting:
            raise ParseError(f"operator {name!r} refers to itself", where)
        self._visiting.add(name)
        spec, w = self.specs[name]
        op = self._build(name, spec, w)
        self._visiting.discard(name)
        self.built[name] = op
        return op

    def _names(self, spec, w) -> list[str]:
        of = spec["of"]
        if not isinstance(of, list) or not of:
            raise ParseError("'of' must be a nonempty list of operator names", f"{w}.of")
        return of

    def _build(self, name, spec, w) -> Operator:
        kind = spec["kind"]
        if kind == "forward_shift":
            return make_forward_shift(_weight(spec["weight"], f"{w}.weight"), name=name)
        if kind == "backward_shift":
            return make_backward_shift(_weight(spec["weight"], f"{w}.weight"), name=name)
        if kind == "paper_t1":
            return make_backward_shift(WeightSpec.constant(1), name=name)
        if kind == "paper_t2":
            return make_forward_shift(WeightSpec.reciprocal(), name=name)
        if kind == "identity":
            return identity(name)
        if kind == "zero":
            return zero_operator(name)
        if kind == "matrix":
            d = spec["dim"]
            rows = spec["entries"]
            if not isinstance(d, int) or d < 1:
                raise ParseError("dim must be a positive integer", f"{w}.dim")
            if not isinstance(rows, list) or len(rows) != d or any(not isinstance(r, list) or len(r) != d for r in rows):
                raise ParseError(f"entries must be a {d}x{d} nested list", f"{w}.entries")
            arr = np.array([[_scalar(v, f"{w}.entries[{i}][{j}]") for j, v in enumerate(r)]
                            for i, r in enumerate(rows)], dtype=complex)
            return matrix(arr, name=name)
        if kind == "sum":
            names = self._names(spec, w)
            return op_sum(*(self.get(n, f"{w}.of[{i}]") for i, n in enumerate(names)), name=name)
        if kind == "compose":
            names = self._names(spec, w)
            return compose(*(self.get(n, f"{w}.of[{i}]") for i, n in enumerate(names)), name=name)
        # scaled
        return scaled(_scalar(spec["factor"], f"{w}.factor"), self.get(spec["of"], f"{w}.of"), name=name)


def _check_weighted(block, operators: dict, ntuple: int, dim: int):
    where = "$.weighted"
    if not isinstance(block, dict):
        raise ParseError("weighted must be an object", where)
    extra = set(block) - {"weights", "compare_tuple"}
    if extra:
        raise ParseError(f"unknown fields {sorted(extra)}", where)
    if ("weights" in block) == ("compare_tuple" in block):
        raise ParseError("give exactly one of 'weights' or 'compare_tuple'", where)
    if "compare_tuple" in block:
        names = block["compare_tuple"]
        if not isinstance(names, list) or len(names) != ntuple:
            raise ParseError(f"compare_tuple must list {ntuple} operator names", f"{where}.compare_tuple")
        for i, n in enumerate(names):
            if n not in operators:
                raise DanglingReference(str(n), f"{where}.compare_tuple[{i}]")
        return
    w = block["weights"]
    if w in ("ones", "zeros"):
        return
    if isinstance(w, dict) and set(w) == {"random"} and isinstance(w["random"], int):
        return
    if isinstance(w, list) and len(w) == ntuple:
        for k, mat in enumerate(w):
            if not isinstance(mat, list) or len(mat) != dim or any(not isinstance(r, list) or len(r) != dim for r in mat):
                raise ParseError(f"weight matrix must be {dim}x{dim}", f"{where}.weights[{k}]")
        return
    raise ParseError("weights must be 'ones', 'zeros', {\"random\": seed} or a list of matrices",
                     f"{where}.weights")


def parse_scenario(text: str | bytes) -> Scenario:
    """Parse and validate scenario JSON text; all references are resolved."""
    if isinstance(text, bytes):
        raw = text
        text = text.decode("utf-8")
    else:
        raw = text.encode("utf-8")
    digest = hashlib.sha256(raw).hexdigest()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object", "$")
    extra = set(doc) - TOP_KEYS
    if extra:
        raise ParseError(f"unknown fields {sorted(extra)}", "$")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ParseError("scenario needs a nonempty 'name'", "$.name")
    specs = doc.get("operators", [])
    if not isinstance(specs, list):
        raise ParseError("operators must be a list", "$.operators")
    builder = _Builder(specs)
    for n, (_, w) in builder.specs.items():
        builder.get(n, w)

    tup = doc.get("tuple", [])
    if not isinstance(tup, list) or not tup:
        raise ParseError("tuple must be a nonempty list of operator names", "$.tuple")
    for i, n in enumerate(tup):
        if n not in builder.built:
            raise DanglingReference(str(n), f"$.tuple[{i}]")

    vecs_doc = doc.get("vectors", {})
    if not isinstance(vecs_doc, dict):
        raise ParseError("vectors must be an object mapping names to entry lists", "$.vectors")
    vectors = {k: _vector(v, f"$.vectors.{k}") for k, v in vecs_doc.items()}

    params = default_params()
    pdoc = doc.get("params", {})
    if not isinstance(pdoc, dict):
        raise ParseError("params must be an object", "$.params")
    extra = set(pdoc) - set(DEFAULT_PARAMS)
    if extra:
        raise ParseError(f"unknown params {sorted(extra)}", "$.params")
    params.update(pdoc)
    if params["anchor"] is not None and params["anchor"] not in vectors:
        raise DanglingReference(str(params["anchor"]), "$.params.anchor")

    weighted = doc.get("weighted")
    if weighted is not None:
        _check_weighted(weighted, builder.built, len(tup), params["dim"])

    return Scenario(
        name=name,
        operators=dict(builder.built),
        operator_specs={n: s for n, (s, _) in builder.specs.items()},
        tuple_names=list(tup),
        vectors=vectors,
        params=params,
        weighted=weighted,
        digest=digest,
        description=doc.get("description", ""),
    )


def _e(k):
    return [{"index": k, "re": 1.0, "im": 0.0}]


BUILTINS = {
    "paper-example": json.dumps({
        "name": "paper-example",
        "description": "Backward shift T1 and weighted forward shift T2 (1/n) on l2",
        "operators": [
            {"name": "T1", "kind": "paper_t1"},
            {"name": "T2", "kind": "paper_t2"},
        ],
        "tuple": ["T1", "T2"],
        "vectors": {f"e{k}": _e(k) for k in range(2, 7)},
        "params": {"depth": 16, "threshold": 0.3, "n_max": 50, "dim": 32},
    }, indent=2),
    "geometric-shifts": json.dumps({
        "name": "geometric-shifts",
        "description": "Forward shifts with weights 2^-n and 3^-n",
        "operators": [
            {"name": "S1", "kind": "forward_shift", "weight": {"type": "geometric", "ratio": 0.5}},
            {"name": "S2", "kind": "forward_shift", "weight": {"type": "geometric", "ratio": 1.0 / 3.0}},
        ],
        "tuple": ["S1", "S2"],
        "vectors": {"e1": _e(1)},
        "params": {"dim": 16, "depth": 12, "tol": 1e-10, "threshold": 1e-3},
        "weighted": {"weights": {"random": 0}},
    }, indent=2),
    "backward-pair": json.dumps({
        "name": "backward-pair",
        "description": "Two backward shifts; e1 is annihilated by both",
        "operators": [
            {"name": "B1", "kind": "backward_shift", "weight": {"type": "constant", "value": 1.0}},
            {"name": "B2", "kind": "backward_shift", "weight": {"type": "geometric", "ratio": 0.5}},
        ],
        "tuple": ["B1", "B2"],
        "vectors": {"e1": _e(1)},
        "params": {"dim": 16, "depth": 12, "tol": 1e-10},
    }, indent=2),
}


def load_scenario(ref: str) -> Scenario:
    """``builtin:<name>`` or a filesystem path."""
    if ref.startswith("builtin:"):
        key = ref.split(":", 1)[1]
        if key not in BUILTINS:
            raise ParseError(f"unknown builtin scenario {key!r}; have {sorted(BUILTINS)}", ref)
        return parse_scenario(BUILTINS[key])
    try:
        data = Path(ref).read_bytes()
    except OSError as exc:
        raise ParseError(str(exc), ref) from None
    return parse_scenario(data)
