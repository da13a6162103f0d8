"""Radius sequences and verdicts for (joint) local quasinilpotence.

Every growth or decay is tracked in the log domain: vectors are renormalised
after each application and ``log ||.||`` is accumulated, so factorial decay
never underflows.  An exactly vanishing orbit is recorded with
``log_norm=None`` rather than ``-inf``.

Word convention: a word ``(w_1, ..., w_n)`` is written leftmost-first and
denotes ``T_{w_1} ... T_{w_n}``, so ``w_n`` acts first.  Word streams grow
on the left: the length-``n+1`` product is ``T_a`` applied to the length-``n``
product.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coordspace import CoordVector, in_cone, vec_norm
from .errors import BadWordIndex, BudgetExceeded, ConstantTermPresent, InvalidSeed
from .operators import Operator, OperatorTuple, is_positive, op_sum, scaled, zero_operator

__all__ = [
    "DEFAULT_BUDGET",
    "RadiusPoint",
    "RadiusSequence",
    "WordSpec",
    "QnilVerdict",
    "JsrEstimate",
    "local_radius_sequence",
    "word_radius_sequence",
    "uniform_joint_sequence",
    "pruning_eligible",
    "certify_joint",
    "polynomial_operator",
    "polynomial_radius",
    "polynomial_bound",
    "jsr_estimate",
]

DEFAULT_BUDGET = 2**24

CERTIFIED = "certified-decaying"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RadiusPoint:
    n: int
    log_norm: float | None  # None marks an exactly vanishing term
    root: float

    @property
    def exact_zero(self) -> bool:
        return self.log_norm is None

    @classmethod
    def make(cls, n: int, log_norm: float | None) -> "RadiusPoint":
        if log_norm is None:
            return cls(n, None, 0.0)
        return cls(n, log_norm, math.exp(log_norm / n))


@dataclass(frozen=True)
class RadiusSequence:
    """``r_n = ||S_n x||^{1/n}`` for ``n = 1..len``.

    ``kind`` is ``single-operator``, ``fixed-word`` or ``uniform-max``.
    ``words`` holds, per ``n``, the word realising the term when known.
    ``lower_bound_only`` is set for beam-search maxima.
    """

    points: tuple[RadiusPoint, ...]
    kind: str
    lower_bound_only: bool = False
    words: tuple[tuple[int, ...] | None, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, n: int) -> RadiusPoint:
        """1-based access: ``seq[n]`` is the n-th term."""
        return self.points[n - 1]

    @property
    def roots(self) -> list[float]:
        return [p.root for p in self.points]

    @property
    def log_norms(self) -> list[float | None]:
        return [p.log_norm for p in self.points]

    @property
    def final(self) -> RadiusPoint:
        return self.points[-1]

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "lower_bound_only": self.lower_bound_only,
            "points": [{"n": p.n, "root": p.root, "log_norm": p.log_norm} for p in self.points],
        }
        if self.words is not None:
            out["words"] = [list(w) if w is not None else None for w in self.words]
        if self.meta:
            out["meta"] = dict(self.meta)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "RadiusSequence":
        pts = tuple(RadiusPoint(p["n"], p["log_norm"], p["root"]) for p in d["points"])
        words = d.get("words")
        if words is not None:
            words = tuple(tuple(w) if w is not None else None for w in words)
        return cls(pts, d["kind"], d.get("lower_bound_only", False), words, dict(d.get("meta", {})))

    def csv_rows(self) -> list[tuple]:
        return [(p.n, p.root, "" if p.log_norm is None else p.log_norm) for p in self.points]


def _pad_zero(points: list[RadiusPoint], n_max: int):
    for n in range(len(points) + 1, n_max + 1):
        points.append(RadiusPoint.make(n, None))


def _unit(x: CoordVector, norm: str) -> tuple[float, CoordVector]:
    nrm = vec_norm(x, norm)
    if nrm == 0:
        raise InvalidSeed("the seed vector is zero")
    return math.log(nrm), x / nrm


def local_radius_sequence(T: Operator, x: CoordVector, n_max: int, norm: str = "two") -> RadiusSequence:
    """``r_n = ||T^n x||^{1/n}`` for ``n = 1..n_max``.

    Iteration stops at the first exactly vanishing term; the remaining terms
    are recorded as exact zeros.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    log_acc, y = _unit(x, norm)
    points: list[RadiusPoint] = []
    for n in range(1, n_max + 1):
        y = T.apply(y)
        nrm = vec_norm(y, norm)
        if nrm == 0:
            break
        log_acc += math.log(nrm)
        y = y / nrm
        points.append(RadiusPoint.make(n, log_acc))
    _pad_zero(points, n_max)
    return RadiusSequence(tuple(points), "single-operator")


@dataclass(frozen=True)
class WordSpec:
    """An infinite word stream.

    ``periodic(letters)``: the leftmost-first period is cycled so that the
    length ``m*len(letters)`` product equals ``(T_{l_1} ... T_{l_L})^m``.
    ``explicit(letters)``: a length-``n_max`` word, leftmost-first; the
    length-``n`` product is its rightmost ``n`` letters.
    ``random(seed)``: i.i.d. uniform letters from a seeded generator.
    """

    type: str
    letters: tuple[int, ...] = ()
    seed: int | None = None

    @classmethod
    def periodic(cls, letters):
        return cls("periodic", tuple(letters))

    @classmethod
    def explicit(cls, letters):
        return cls("explicit", tuple(letters))

    @classmethod
    def random(cls, seed: int):
        return cls("random", (), int(seed))

    def actions(self, n_max: int, N: int) -> list[int]:
        """Letters in the order they act (first element acts first)."""
        if self.type == "periodic":
            if not self.letters:
                raise BadWordIndex("periodic word needs at least one letter")
            rev = self.letters[::-1]
            acts = [rev[i % len(rev)] for i in range(n_max)]
        elif self.type == "explicit":
            if len(self.letters) < n_max:
                raise ValueError(f"explicit word has {len(self.letters)} letters, need {n_max}")
            acts = list(self.letters[::-1][:n_max])
        elif self.type == "random":
            rng = np.random.default_rng(self.seed)
            acts = [int(a) for a in rng.integers(1, N + 1, size=n_max)]
        else:
            raise ValueError(f"unknown word type {self.type!r}")
        for a in acts:
            if not (1 <= a <= N):
                raise BadWordIndex(f"letter {a} outside 1..{N}")
        return acts

    def to_json(self) -> dict:
        out = {"type": self.type}
        if self.letters:
            out["letters"] = list(self.letters)
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def word_radius_sequence(tup: OperatorTuple, word: WordSpec | Sequence[int], x: CoordVector,
                         n_max: int, norm: str = "two") -> RadiusSequence:
    """``||T_{i_1} ... T_{i_n} x||^{1/n}`` along one word stream.

    A bare sequence of letters is read as a periodic word.
    """
    if not isinstance(word, WordSpec):
        word = WordSpec.periodic(word)
    acts = word.actions(n_max, len(tup))
    log_acc, y = _unit(x, norm)
    points: list[RadiusPoint] = []
    for n, a in enumerate(acts, start=1):
        y = tup.members[a - 1].apply(y)
        nrm = vec_norm(y, norm)
        if nrm == 0:
            break
        log_acc += math.log(nrm)
        y = y / nrm
        points.append(RadiusPoint.make(n, log_acc))
    _pad_zero(points, n_max)
    words = tuple(tuple(acts[:n][::-1]) for n in range(1, n_max + 1))
    return RadiusSequence(tuple(points), "fixed-word", words=words, meta={"word": word.to_json()})


# -- uniform (max over all words) -------------------------------------------

@dataclass(frozen=True)
class _Node:
    log: float
    vec: CoordVector  # unit norm
    word: tuple[int, ...]


def _ordered_map(fn, items: list, workers: int) -> list:
    """Map ``fn`` over contiguous chunks and concatenate in input order."""
    if workers <= 1 or len(items) < 2:
        return fn(items)
    size = math.ceil(len(items) / workers)
    chunks = [items[i:i + size] for i in range(0, len(items), size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, chunks))
    return [node for part in parts for node in part]


def _expand(tup: OperatorTuple, norm: str):
    members = tup.members

    def run(nodes: list[_Node]) -> list[_Node]:
        out = []
        for nd in nodes:
            for i, T in enumerate(members, start=1):
                y = T.apply(nd.vec)
                nrm = vec_norm(y, norm)
                if nrm == 0:
                    continue
                out.append(_Node(nd.log + math.log(nrm), y / nrm, (i,) + nd.word))
        return out

    return run


def _dominated(u: _Node, v: _Node) -> bool:
    """Entrywise ``u <= v`` for cone vectors stored as (log scale, unit vector)."""
    ve = v.vec._entries
    shift = u.log - v.log
    for k, a in u.vec._entries.items():
        a = a.real
        if a <= 0:
            continue
        b = ve.get(k, 0j).real
        if b <= 0 or math.log(a) + shift > math.log(b):
            return False
    return True


def _prune_dominated(nodes: list[_Node]) -> list[_Node]:
    # visit heaviest first so dominators are usually kept before their victims
    order = sorted(range(len(nodes)), key=lambda i: -nodes[i].log)
    kept: list[int] = []
    for i in order:
        if not any(_dominated(nodes[i], nodes[j]) for j in kept):
            kept.append(i)
    return [nodes[i] for i in sorted(kept)]


def _probe_window(tup: OperatorTuple, x: CoordVector, n_max: int) -> int | None:
    if tup.dim is not None:
        return tup.dim
    lowers = [m.bandwidth()[0] for m in tup.members]
    if any(lo is None for lo in lowers):
        return None
    return x.max_index + n_max * max(lowers) + 1


def pruning_eligible(tup: OperatorTuple, x: CoordVector, n_max: int) -> bool:
    """Dominance pruning is sound only for positive members and a cone seed."""
    if not in_cone(x, 0.0).in_cone:
        return False
    probe = _probe_window(tup, x, n_max)
    if probe is None:
        return False
    return all(is_positive(m, probe, 0.0).positive for m in tup.members)


def _parse_strategy(strategy, beam_width):
    if isinstance(strategy, str) and strategy.startswith("beam:"):
        return "beam", int(strategy.split(":", 1)[1])
    if strategy in ("pruned", "exact-with-dominance-pruning"):
        return "pruned", None
    if strategy == "exact":
        return "exact", None
    if strategy == "beam":
        if beam_width is None or beam_width < 1:
            raise ValueError("beam strategy requires width >= 1")
        return "beam", int(beam_width)
    raise ValueError(f"unknown strategy {strategy!r}")


def uniform_joint_sequence(tup: OperatorTuple, x: CoordVector, n_max: int, strategy: str = "exact",
                           beam_width: int | None = None, budget: int = DEFAULT_BUDGET,
                           norm: str = "two", workers: int = 1) -> RadiusSequence:
    """``beta_n = max_{S in T^n} ||S x||^{1/n}`` by breadth-first vector propagation.

    ``exact`` keeps every nonzero word image.  ``pruned`` additionally drops
    frontier vectors dominated entrywise by another frontier vector; it is
    used only when :func:`pruning_eligible` holds and otherwise falls back to
    ``exact`` (``meta["strategy"]`` records what ran).  ``beam`` keeps the
    ``beam_width`` heaviest vectors and yields lower bounds only.

    ``budget`` caps the number of operator applications; exceeding it raises
    :class:`BudgetExceeded` carrying the exact prefix computed so far.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    mode, width = _parse_strategy(strategy, beam_width)
    if mode == "pruned" and not pruning_eligible(tup, x, n_max):
        mode = "exact"
    log0, unit = _unit(x, norm)
    frontier = [_Node(log0, unit, ())]
    expand = _expand(tup, norm)
    N = len(tup)
    points: list[RadiusPoint] = []
    words: list[tuple[int, ...] | None] = []
    applications = 0

    def partial():
        pts = list(points)
        return RadiusSequence(tuple(pts), "uniform-max", mode == "beam", tuple(words),
                              {"strategy": mode, "applications": applications})

    for n in range(1, n_max + 1):
        need = len(frontier) * N
        if applications + need > budget:
            raise BudgetExceeded(
                f"depth {n} needs {need} more applications; budget {budget} "
                f"(deepest exact depth {n - 1})", deepest=n - 1, partial=partial())
        applications += need
        children = _ordered_map(expand, frontier, workers)
        if not children:
            break
        best = max(range(len(children)), key=lambda i: children[i].log)
        points.append(RadiusPoint.make(n, children[best].log))
        words.append(children[best].word)
        if mode == "pruned":
            children = _prune_dominated(children)
        elif mode == "beam" and len(children) > width:
            top = sorted(range(len(children)), key=lambda i: -children[i].log)[:width]
            children = [children[i] for i in sorted(top)]
        frontier = children
    while len(points) < n_max:
        points.append(RadiusPoint.make(len(points) + 1, None))
        words.append(None)
    seq = partial()
    return seq


# -- verdicts ----------------------------------------------------------------

@dataclass(frozen=True)
class QnilVerdict:
    """Finite-depth evidence for membership in Q (per word) or UQ (uniform)."""

    status: str
    witness: tuple[int, ...] | None
    final_root: float
    depth: int
    strategy: str
    threshold: float
    mode: str
    seed: int | None = None
    words_examined: int = 0

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "witness": list(self.witness) if self.witness is not None else None,
            "final_root": self.final_root,
            "depth": self.depth,
            "strategy": self.strategy,
            "threshold": self.threshold,
            "mode": self.mode,
            "seed": self.seed,
            "words_examined": self.words_examined,
        }

    @classmethod
    def from_json(cls, d: dict) -> "QnilVerdict":
        w = d.get("witness")
        return cls(d["status"], tuple(w) if w is not None else None, d["final_root"], d["depth"],
                   d["strategy"], d["threshold"], d["mode"], d.get("seed"), d.get("words_examined", 0))


def _tail(seq: RadiusSequence, depth: int) -> list[float]:
    return seq.roots[depth - depth // 2:depth]


def _nonincreasing(vals: list[float]) -> bool:
    return all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def _non_decaying(seq: RadiusSequence, depth: int, threshold: float) -> bool:
    """Whole tail at or above ``1.05 * threshold`` and not trending down.

    The trend is judged as stable-or-growing when the last root keeps at
    least 90% of the first tail root; single large terms do not count.
    """
    tail = _tail(seq, depth)
    if not tail or min(tail) < 1.05 * threshold:
        return False
    return tail[-1] >= 0.9 * tail[0]


def _candidate_words(N: int, max_period: int = 3):
    for L in range(1, max_period + 1):
        for letters in itertools.product(range(1, N + 1), repeat=L):
            yield WordSpec.periodic(letters)


def certify_joint(tup: OperatorTuple, x: CoordVector, depth: int, decay_threshold: float,
                  mode: str = "uniform", count: int = 32, seed: int = 0, strategy: str | None = None,
                  budget: int = DEFAULT_BUDGET, norm: str = "two", workers: int = 1) -> QnilVerdict:
    """Classify ``x`` as certified-decaying, refuted or inconclusive at finite depth.

    ``uniform`` certifies from ``beta_depth <= threshold`` with a
    non-increasing tail of length ``depth // 2``.  ``per-word`` instead
    requires that of every examined word: ``count`` seeded random words plus
    all periodic words of period <= 3.  Either mode refutes when some
    examined word keeps its whole tail at or above ``1.05 * threshold``
    without a downward trend; that word is returned as witness.
    """
    if depth < 4:
        raise ValueError("depth must be >= 4")
    if x.is_zero():
        raise InvalidSeed("certification needs a nonzero vector")
    N = len(tup)
    candidates = list(_candidate_words(N))

    if mode == "uniform":
        if strategy is None:
            strategy = "pruned"
        beta = uniform_joint_sequence(tup, x, depth, strategy=strategy, budget=budget,
                                      norm=norm, workers=workers)
        used = beta.meta["strategy"]
        final = beta.final.root
        tail = _tail(beta, depth)
        if not beta.lower_bound_only and final <= decay_threshold and _nonincreasing(tail):
            return QnilVerdict(CERTIFIED, None, final, depth, used, decay_threshold, mode)
        if beta.words and beta.words[-1] is not None:
            candidates.append(WordSpec.explicit(beta.words[-1]))
    elif mode == "per-word":
        used = "per-word"
        rng = np.random.default_rng(seed)
        candidates.extend(WordSpec.random(int(s)) for s in rng.integers(0, 2**63 - 1, size=count))
        final = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")

    all_decay = True
    for w in candidates:
        seq = word_radius_sequence(tup, w, x, depth, norm=norm)
        if _non_decaying(seq, depth, decay_threshold):
            return QnilVerdict(REFUTED, seq.words[-1], seq.final.root, depth, used,
                               decay_threshold, mode, seed if mode == "per-word" else None,
                               len(candidates))
        if mode == "per-word":
            final = max(final, seq.final.root)
            if seq.final.root > decay_threshold or not _nonincreasing(_tail(seq, depth)):
                all_decay = False
    if mode == "per-word" and all_decay:
        return QnilVerdict(CERTIFIED, None, final, depth, used, decay_threshold, mode, seed,
                           len(candidates))
    return QnilVerdict(INCONCLUSIVE, None, final, depth, used, decay_threshold, mode,
                       seed if mode == "per-word" else None, len(candidates))


# -- polynomials -------------------------------------------------------------

def _check_poly(tup: OperatorTuple, poly):
    terms = []
    for coef, word in poly:
        word = tuple(word)
        coef = complex(coef)
        if not word:
            raise ConstantTermPresent("polynomial has a constant term; p(0, ..., 0) must vanish")
        if not (math.isfinite(coef.real) and math.isfinite(coef.imag)):
            raise ValueError("polynomial coefficients must be finite")
        for a in word:
            if not (1 <= a <= len(tup)):
                raise BadWordIndex(f"letter {a} outside 1..{len(tup)}")
        terms.append((coef, word))
    return terms


def polynomial_operator(tup: OperatorTuple, poly) -> Operator:
    """Structural ``p(T) = sum_c c * T_{w_1} ... T_{w_m}`` from ``[(c, word), ...]``."""
    terms = _check_poly(tup, poly)
    if not terms:
        return zero_operator()
    return op_sum(*(scaled(c, tup.word_operator(w)) for c, w in terms))


def polynomial_radius(tup: OperatorTuple, poly, x: CoordVector, n_max: int,
                      norm: str = "two") -> RadiusSequence:
    """Local radius sequence of ``p(T_{i_1}, ..., T_{i_m})`` at ``x``.

    Polynomials with a constant term are rejected: ``I + F`` can fail to be
    locally quasinilpotent even when ``F`` is.
    """
    return local_radius_sequence(polynomial_operator(tup, poly), x, n_max, norm=norm)


def polynomial_bound(tup: OperatorTuple, poly, x: CoordVector, n_max: int,
                     budget: int = DEFAULT_BUDGET, norm: str = "two") -> list[float | None]:
    """Upper bounds ``k * c * (max_S ||S x||)^{1/n}`` on ``||p(T)^n x||^{1/n}``.

    ``k`` counts monomials and ``c`` is the largest coefficient modulus.
    Expanding ``p(T)^n`` gives ``k^n`` words whose lengths lie in
    ``[n * dmin, n * dmax]``, so the max runs over all those lengths.
    Entries are ``None`` when every such word annihilates ``x``.
    """
    terms = _check_poly(tup, poly)
    k = len(terms)
    c = max(abs(cf) for cf, _ in terms)
    dmin = min(len(w) for _, w in terms)
    dmax = max(len(w) for _, w in terms)
    beta = uniform_joint_sequence(tup, x, n_max * dmax, strategy="pruned", budget=budget, norm=norm)
    bounds: list[float | None] = []
    for n in range(1, n_max + 1):
        logs = [beta[L].log_norm for L in range(n * dmin, n * dmax + 1)]
        logs = [v for v in logs if v is not None]
        if not logs or c == 0:
            bounds.append(None)
        else:
            bounds.append(k * c * math.exp(max(logs) / n))
    return bounds


# -- joint spectral radius ---------------------------------------------------

@dataclass(frozen=True)
class JsrEstimate:
    lower: float
    upper: float
    depth: int
    truncation_dim: int
    per_depth: tuple[tuple[int, float, float], ...] = ()  # (n, max rho^{1/n}, max ||S||^{1/n})

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "depth": self.depth,
            "truncation_dim": self.truncation_dim,
            "per_depth": [list(t) for t in self.per_depth],
        }


def _spectral_radius(S: np.ndarray, v0: np.ndarray, iters: int = 200, tol: float = 1e-10) -> float:
    """Power-iteration estimate of the spectral radius.

    Returns the settled growth ratio when successive ratios agree to ``tol``;
    otherwise the geometric mean of the ratios over the second half of the
    run, which still tends to the spectral radius when the dominant
    eigenvalues rotate or form a Jordan block.
    """
    v = v0 / np.linalg.norm(v0)
    ratios = []
    prev = None
    for _ in range(iters):
        w = S @ v
        r = float(np.linalg.norm(w))
        if r == 0.0:
            return 0.0
        ratios.append(r)
        if prev is not None and abs(r - prev) <= tol * max(r, 1.0):
            return r
        prev = r
        v = w / r
    half = ratios[len(ratios) // 2:]
    return float(math.exp(math.fsum(math.log(r) for r in half) / len(half)))


def jsr_estimate(tup: OperatorTuple, truncation_dim: int, n_max: int, budget: int = 1 << 14) -> JsrEstimate:
    """Bracket the joint spectral radius of the ``d x d`` truncations.

    ``upper = min_n (max_{S in T^n} ||S||_2)^{1/n}`` and
    ``lower = max_n max_{S in T^n} rho(S)^{1/n}``, over materialised
    products for ``n <= n_max``.  ``budget`` caps the number of products.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = truncation_dim
    mats = [m.truncate(d) for m in tup.members]
    rng = np.random.default_rng(20060803)
    v0 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    level = [np.eye(d, dtype=complex)]
    lower, upper = 0.0, math.inf
    per_depth = []
    produced = 0
    for n in range(1, n_max + 1):
        need = len(level) * len(mats)
        if produced + need > budget:
            partial = JsrEstimate(lower, upper, n - 1, d, tuple(per_depth))
            raise BudgetExceeded(f"depth {n} needs {need} more products; budget {budget}",
                                 deepest=n - 1, partial=partial)
        produced += need
        level = [M @ P for P in level for M in mats]
        norm_n = max(float(np.linalg.norm(S, 2)) for S in level) ** (1.0 / n)
        rho_n = max(_spectral_radius(S, v0) for S in level) ** (1.0 / n)
        per_depth.append((n, rho_n, norm_n))
        lower = max(lower, rho_n)
        upper = min(upper, norm_n)
    return JsrEstimate(lower, upper, n_max, d, tuple(per_depth))
