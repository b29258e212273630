"""Invertible measure-preserving base systems at desk scale.

Three kinds of base are supported:

* ``full_shift`` -- the two-sided full shift on N symbols with a Bernoulli
  measure;
* ``sft`` -- a two-sided subshift of finite type with a stationary Markov
  measure (transition matrix must be row-stochastic on allowed edges);
* ``circle_rotation`` -- an irrational rotation, used only for spectrum
  experiments (no cylinders, no castles).

Symbolic points are lazy bi-infinite words: the symbol at index i is a
pure function of (seed, i) for Bernoulli, and of the seeded uniform ladder
for Markov chains, so extending a window in any order is idempotent and
regeneration is bit-identical.  The shift is therefore exactly invertible.

Cylinder sets are the measurable workhorse: they are clopen, their
measures are exact products, and intersections are decidable symbol by
symbol, which is what makes castle bookkeeping exact in this setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import HorizonExceeded, NotIrrational
from .rng import draw_category, index_uniform, substream_seed

FULL_SHIFT = "full_shift"
SFT = "sft"
CIRCLE_ROTATION = "circle_rotation"


def _check_weights(w: np.ndarray):
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive (fully supported measure)")
    if abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise ValueError("weights must sum to one")


def _reject_near_rational(angle: float, max_den: int = 10**6, tol: float = 1e-12):
    """Continued-fraction check: reject angles within tol of p/q, q <= max_den."""
    frac = Fraction(angle).limit_denominator(max_den)
    if abs(angle - float(frac)) < tol:
        raise NotIrrational(f"angle {angle} is within {tol} of {frac}")


class BaseSystem:
    """Invertible measure-preserving base dynamics.

    Immutable after construction.  For symbolic kinds, `weights` is either
    the Bernoulli vector or the Markov transition matrix; the stationary
    vector is computed once for Markov systems.
    """

    def __init__(self, kind: str, *, symbols: int = 2, weights=None,
                 adjacency=None, angle: float = None, seed: int = 0):
        self.kind = kind
        self.seed = int(seed)
        if kind == FULL_SHIFT:
            w = np.full(symbols, 1.0 / symbols) if weights is None else np.asarray(weights, float)
            _check_weights(w)
            self.n_symbols = len(w)
            self.weights = w
            self.cum = np.cumsum(w)
        elif kind == SFT:
            p = np.asarray(weights, dtype=float)
            adj = np.asarray(adjacency, dtype=int)
            if p.shape[0] != p.shape[1] or adj.shape != p.shape:
                raise ValueError("adjacency and transition matrices must be square and congruent")
            if np.any((adj == 0) & (p != 0)) or np.any((adj == 1) & (p <= 0)):
                raise ValueError("transition weights must be positive exactly on allowed edges")
            for row in p:
                _check_weights(row[row > 0])
            if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
                raise ValueError("transition rows must sum to one")
            self.n_symbols = p.shape[0]
            self.adjacency = adj
            self.transition = p
            self.stationary = _stationary_vector(p)
            # reversed chain for leftward extension: R[i, j] = pi_j P[j, i] / pi_i
            pi = self.stationary
            self.reverse = (p.T * pi[None, :]) / pi[:, None]
            self.reverse = self.reverse / self.reverse.sum(axis=1, keepdims=True)
            self.cum_rows = np.cumsum(p, axis=1)
            self.cum_rows_rev = np.cumsum(self.reverse, axis=1)
            self.cum_stationary = np.cumsum(pi)
        elif kind == CIRCLE_ROTATION:
            if angle is None:
                raise ValueError("circle_rotation needs an angle")
            _reject_near_rational(float(angle) % 1.0)
            self.angle = float(angle) % 1.0
        else:
            raise ValueError(f"unknown base kind {kind!r}")

    # -- measures ------------------------------------------------------------

    def symbol_measure(self, word, first_index_context: Optional[int] = None) -> float:
        """Exact measure of the cylinder fixing `word` at consecutive indices."""
        word = tuple(word)
        if self.kind == FULL_SHIFT:
            out = 1.0
            for s in word:
                out *= self.weights[s]
            return out
        if self.kind == SFT:
            out = self.stationary[word[0]]
            for a, b in zip(word, word[1:]):
                out *= self.transition[a, b]
            return out
        raise ValueError("cylinder measures need a symbolic base")

    # -- sampling ------------------------------------------------------------

    def sample_point(self, seed: int):
        """A mu-distributed point, deterministic in `seed`."""
        if self.kind == CIRCLE_ROTATION:
            u = index_uniform(substream_seed(self.seed, "rotation-point", seed), 0)
            return CirclePoint(self, u, 0)
        word_seed = substream_seed(self.seed, "word", seed)
        return ShiftPoint(_WordStore(self, word_seed), 0)

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "seed": self.seed}
        if self.kind == FULL_SHIFT:
            obj["weights"] = self.weights.tolist()
        elif self.kind == SFT:
            obj["adjacency"] = self.adjacency.tolist()
            obj["transition"] = self.transition.tolist()
        else:
            obj["angle"] = self.angle
        return obj

    @staticmethod
    def from_json(obj: dict) -> "BaseSystem":
        kind = obj["kind"]
        if kind == FULL_SHIFT:
            return BaseSystem(FULL_SHIFT, weights=obj["weights"], seed=obj.get("seed", 0))
        if kind == SFT:
            return BaseSystem(SFT, adjacency=obj["adjacency"], weights=obj["transition"],
                              seed=obj.get("seed", 0))
        return BaseSystem(CIRCLE_ROTATION, angle=obj["angle"], seed=obj.get("seed", 0))


def _stationary_vector(p: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(p.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, i])
    v = np.abs(v)
    return v / v.sum()


class _WordStore:
    """Lazy bi-infinite word with deterministic seeded tails.

    Symbols are stored in a growing buffer; `lo` is the absolute index of
    buffer[0].  Extension order never changes values: Bernoulli symbols are
    pure functions of (seed, index); Markov symbols are extended
    sequentially to the right with per-index uniforms and to the left with
    the reversed chain, again with per-index uniforms.
    """

    __slots__ = ("base", "seed", "buf", "lo")

    def __init__(self, base: BaseSystem, seed: int):
        self.base = base
        self.seed = seed
        self.buf = []
        self.lo = 0
        # seed symbol at index 0
        if base.kind == FULL_SHIFT:
            self.buf.append(draw_category(index_uniform(seed, 0), base.cum))
        else:
            self.buf.append(draw_category(index_uniform(seed, 0), base.cum_stationary))

    def ensure(self, lo: int, hi: int):
        base = self.base
        while self.lo > lo:
            i = self.lo - 1
            u = index_uniform(self.seed, i)
            if base.kind == FULL_SHIFT:
                s = draw_category(u, base.cum)
            else:
                s = draw_category(u, base.cum_rows_rev[self.buf[0]])
            self.buf.insert(0, s)
            self.lo = i
        while self.lo + len(self.buf) < hi:
            i = self.lo + len(self.buf)
            u = index_uniform(self.seed, i)
            if base.kind == FULL_SHIFT:
                s = draw_category(u, base.cum)
            else:
                s = draw_category(u, base.cum_rows[self.buf[-1]])
            self.buf.append(s)

    def symbol(self, i: int) -> int:
        if not (self.lo <= i < self.lo + len(self.buf)):
            pad = 32
            self.ensure(min(i - pad, self.lo), max(i + pad, self.lo + len(self.buf)))
        return self.buf[i - self.lo]


@dataclass(frozen=True)
class ShiftPoint:
    """A point of a symbolic base: a shared lazy word plus an origin offset.

    The shift moves the origin, so f is exactly invertible and orbits cost
    O(1) per step.  Two points are equal iff they share the store and the
    origin.
    """

    store: _WordStore
    origin: int

    @property
    def base(self) -> BaseSystem:
        return self.store.base

    def symbol(self, i: int) -> int:
        """Symbol at position i relative to the current origin."""
        return self.store.symbol(self.origin + i)

    def window(self, lo: int, hi: int) -> tuple:
        self.store.ensure(self.origin + lo, self.origin + hi)
        return tuple(self.store.symbol(self.origin + k) for k in range(lo, hi))

    def shifted(self, k: int) -> "ShiftPoint":
        return ShiftPoint(self.store, self.origin + k)

    def __eq__(self, other):
        return isinstance(other, ShiftPoint) and other.store is self.store and other.origin == self.origin

    def __hash__(self):
        return hash((id(self.store), self.origin))


@dataclass(frozen=True)
class CirclePoint:
    """theta0 + n * angle mod 1, tracked as (theta0, n) so f is invertible."""

    base: BaseSystem
    theta0: float
    n: int

    @property
    def value(self) -> float:
        return (self.theta0 + self.n * self.base.angle) % 1.0

    def shifted(self, k: int) -> "CirclePoint":
        return CirclePoint(self.base, self.theta0, self.n + k)


def step(base: BaseSystem, x, k: int = 1):
    """f^k(x) for any integer k."""
    return x.shifted(k)


# -- cylinders -------------------------------------------------------------------

@dataclass(frozen=True)
class Cylinder:
    """The set of points whose symbols at offset..offset+len-1 equal `word`.

    Offsets are relative to a point's current origin ("now" is index 0).
    """

    offset: int
    word: tuple

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(s) for s in self.word))

    @property
    def length(self) -> int:
        return len(self.word)

    def contains(self, x: ShiftPoint) -> bool:
        return all(x.symbol(self.offset + t) == s for t, s in enumerate(self.word))

    def shifted(self, k: int) -> "Cylinder":
        """Image f^k(C) as a cylinder: constraints move by -k."""
        return Cylinder(self.offset - k, self.word)

    def measure(self, base: BaseSystem) -> float:
        return base.symbol_measure(self.word)

    def intersects(self, other: "Cylinder") -> bool:
        """Exact symbolic check; disjoint iff constraints conflict somewhere.

        Non-overlapping constraint windows always intersect on a full shift;
        for SFTs we additionally require some allowed path, which holds for
        fully supported chains, so the overlap check is still exact.
        """
        lo = max(self.offset, other.offset)
        hi = min(self.offset + self.length, other.offset + other.length)
        for i in range(lo, hi):
            if self.word[i - self.offset] != other.word[i - other.offset]:
                return False
        return True

    def covers(self, other: "Cylinder") -> bool:
        """True iff self contains other as a set: every constraint of self
        is among other's constraints with the same symbol."""
        for t, s in enumerate(self.word):
            pos = self.offset + t
            if not (other.offset <= pos < other.offset + other.length):
                return False
            if other.word[pos - other.offset] != s:
                return False
        return True

    def refine(self, other: "Cylinder") -> Optional["Cylinder"]:
        """Smallest cylinder containing the intersection, None if disjoint.

        Only valid when the union of the two constraint windows is an
        interval (which is how castles use it)."""
        if not self.intersects(other):
            return None
        lo = min(self.offset, other.offset)
        hi = max(self.offset + self.length, other.offset + other.length)
        syms = {}
        for c in (self, other):
            for t, s in enumerate(c.word):
                syms[c.offset + t] = s
        if set(syms) != set(range(lo, hi)):
            raise ValueError("refinement of non-contiguous cylinders")
        return Cylinder(lo, tuple(syms[i] for i in range(lo, hi)))

    def to_json(self) -> dict:
        return {"offset": self.offset, "word": list(self.word)}

    @staticmethod
    def from_json(obj: dict) -> "Cylinder":
        return Cylinder(obj["offset"], tuple(obj["word"]))


@dataclass
class OrbitSegment:
    """Cached forward orbit f^0(x) .. f^(n-1)(x)."""

    x: object
    n: int
    points: list = field(default_factory=list)

    def __post_init__(self):
        if not self.points:
            self.points = [self.x.shifted(j) for j in range(self.n)]


def return_time(base: BaseSystem, x: ShiftPoint, target: Cylinder, cap: int = 10**6) -> int:
    """min{n >= 1 : f^n(x) in target}; raises past the cap."""
    if not target.contains(x):
        raise ValueError("return_time requires x in the target cylinder")
    for n in range(1, cap + 1):
        if target.contains(x.shifted(n)):
            return n
    raise HorizonExceeded(f"no return within {cap} steps")


def sojourn_fraction(base: BaseSystem, x, sets, n: int) -> float:
    """Birkhoff frequency of visits to a union of cylinders over n steps."""
    if isinstance(sets, Cylinder):
        sets = [sets]
    hits = 0
    for j in range(n):
        y = x.shifted(j)
        if any(c.contains(y) for c in sets):
            hits += 1
    return hits / n


# -- Kakutani-Rokhlin castles ------------------------------------------------------

@dataclass(frozen=True)
class Tower:
    """One castle tower: a first-return word over the base cylinder.

    `base_cylinder` pins the word from the base visit through the next
    return, so every fiber of the tower shares its itinerary exactly.
    """

    word: tuple
    height: int
    base_cylinder: Cylinder
    measure: float

    def floor(self, k: int) -> Cylinder:
        return self.base_cylinder.shifted(k)


@dataclass
class Castle:
    """Kakutani-Rokhlin castle with base cylinder G, enumerated up to a cap.

    tail_mass is the Kac mass of the unenumerated towers:
    1 - sum_i height_i * mu(tower_i).
    """

    base: BaseSystem
    base_cylinder: Cylinder
    towers: list
    height_cap: int
    tail_mass: float

    def kac_mass(self) -> float:
        return float(sum(t.height * t.measure for t in self.towers))

    def tower_table(self) -> list:
        return [
            {"word": list(t.word), "height": t.height, "measure": t.measure}
            for t in self.towers
        ]


def _kmp_failure(pattern: tuple) -> list:
    fail = [0] * len(pattern)
    k = 0
    for i in range(1, len(pattern)):
        while k and pattern[i] != pattern[k]:
            k = fail[k - 1]
        if pattern[i] == pattern[k]:
            k += 1
        fail[i] = k
    return fail


def build_castle(base: BaseSystem, g: Cylinder, height_cap: int) -> Castle:
    """Enumerate the first-return towers of the cylinder G up to height_cap.

    Words are walked symbol by symbol through the KMP automaton of G's
    word, so a tower is emitted exactly when the pattern completes for the
    first time at depth = height.  Measures are exact cylinder measures
    conditioned on starting inside G.
    """
    if g.offset != 0:
        raise ValueError("castle base cylinders are anchored at offset 0")
    pattern = g.word
    r = len(pattern)
    fail = _kmp_failure(pattern)
    towers = []

    def extend_state(state: int, s: int) -> int:
        while state and pattern[state] != s:
            state = fail[state - 1]
        return state + 1 if pattern[state] == s else state

    # state after reading the base word itself (self-overlap matters)
    state0 = 0
    for s in pattern:
        state0 = extend_state(state0, s)
    state0 = fail[state0 - 1] if state0 == r else state0

    # depth-first walk over continuations; prefix always starts with `pattern`
    def walk(prefix: tuple, state: int, depth: int):
        if depth > height_cap:
            return
        for s in range(base.n_symbols):
            if base.kind == SFT and base.adjacency[prefix[-1], s] == 0:
                continue
            new_state = extend_state(state, s)
            word = prefix + (s,)
            if new_state == r:
                height = len(word) - r
                if height >= 1:
                    cyl = Cylinder(0, word)
                    # unconditional measure: Kac gives sum_i i * mu(G_i) = 1
                    towers.append(Tower(word, height, cyl, cyl.measure(base)))
            else:
                walk(word, new_state, depth + 1)

    walk(pattern, state0, 1)
    towers.sort(key=lambda t: (t.height, t.word))
    kac = sum(t.height * t.measure for t in towers)
    return Castle(base, g, towers, height_cap, 1.0 - kac)


def refine_tower(castle: Castle, index: int, depth: int) -> Castle:
    """Split tower `index` into subtowers of the same height by extending
    the base word `depth` more symbols.  Measures add up exactly."""
    if depth == 0:
        return castle
    t = castle.towers[index]
    base = castle.base
    children = []

    def extend(word: tuple, k: int):
        if k == 0:
            cyl = Cylinder(0, word)
            children.append(Tower(t.word, t.height, cyl, cyl.measure(base)))
            return
        for s in range(base.n_symbols):
            if base.kind == SFT and base.adjacency[word[-1], s] == 0:
                continue
            extend(word + (s,), k - 1)

    extend(t.word, depth)
    towers = castle.towers[:index] + children + castle.towers[index + 1:]
    return Castle(base, castle.base_cylinder, towers, castle.height_cap, castle.tail_mass)


def floors_disjoint(castle: Castle) -> bool:
    """Exact pairwise disjointness of all tower floors (cylinder algebra)."""
    floors = []
    for ti, t in enumerate(castle.towers):
        for k in range(t.height):
            floors.append((ti, k, t.floor(k)))
    for a in range(len(floors)):
        ti, ki, ca = floors[a]
        for b in range(a + 1, len(floors)):
            tj, kj, cb = floors[b]
            if ca.intersects(cb):
                # same tower, same floor can't happen (a < b); any other
                # overlap breaks the castle property
                return False
    return True
