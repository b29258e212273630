"""Cocycle representations: constant, locally constant, and patched.

The locally constant class is the canonical one here: a generator table
over depth-k one-sided windows makes the uniform distance between two
cocycles exact (max over the common refinement) and makes every patched
cocycle automatically continuous, because patches are indicator functions
of clopen cylinders.

Patched cocycles carry a parent plus a list of (cylinder, matrix) patches;
the innermost (most recently applied) patch wins.  A procedural patch rule
(used by the castle perturbation engine) may also be attached; it
materializes patch entries lazily but deterministically, so evaluation,
serialization of materialized state, and re-runs all agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log
from typing import Optional

import numpy as np

from .dynamics import FULL_SHIFT, SFT, BaseSystem, Cylinder, ShiftPoint
from .errors import (
    BadExponent,
    BaseMismatch,
    FloorCollision,
    MissingTableEntry,
    ProductOverflow,
)
from .linalg import GROUP_GL, GROUP_SL, SquareMatrix, op_norm, wedge_power

OVERFLOW_GUARD = 1e300


class Cocycle:
    """Base class: matrix-valued generator over a base system."""

    base: BaseSystem
    d: int
    group: str

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def value_inv(self, x) -> np.ndarray:
        raise NotImplementedError

    def sup_norm(self) -> float:
        """Exact C0 norm for table-backed generators."""
        raise NotImplementedError

    # -- generic operations ------------------------------------------------

    def iterate(self, x, n: int) -> "CocycleProduct":
        """A^n(x) as a plain product; raises ProductOverflow past 1e300.

        Negative n uses cached inverse generator values along the backward
        orbit: A^-n(x) = A(f^-1 x)^-1 ... A(f^-n x)^-1.
        """
        d = self.d
        out = np.eye(d)
        if n >= 0:
            for j in range(n):
                out = self.value(x.shifted(j)) @ out
                if np.max(np.abs(out)) > OVERFLOW_GUARD:
                    raise ProductOverflow(f"partial product overflow at step {j}")
        else:
            for j in range(1, -n + 1):
                out = self.value_inv(x.shifted(-j)) @ out
                if np.max(np.abs(out)) > OVERFLOW_GUARD:
                    raise ProductOverflow(f"partial product overflow at step {-j}")
        return CocycleProduct(out, x, n)

    def iterate_logscaled(self, x, n: int):
        """(unit-operator-norm direction, log scale) of A^n(x), n >= 0.

        Per-step renormalization by the max entry keeps every intermediate
        in range; the final factor is adjusted so the returned direction
        has operator norm exactly one.
        """
        if n < 0:
            raise ValueError("log-scaled iteration is forward-only")
        out = np.eye(self.d)
        log_scale = 0.0
        for j in range(n):
            out = self.value(x.shifted(j)) @ out
            m = np.max(np.abs(out))
            if m == 0.0 or not np.isfinite(m):
                raise ProductOverflow(f"product degenerated at step {j}")
            if m > 1e120 or m < 1e-120:
                out /= m
                log_scale += log(m)
        s = op_norm(out)
        return out / s, log_scale + log(s)

    def exterior(self, p: int) -> "Cocycle":
        """The induced cocycle on the p-th exterior power."""
        if not 1 <= p <= self.d:
            raise BadExponent(f"p = {p} outside 1..{self.d}")
        if p == 1:
            return self
        return ExteriorCocycle(self, p)

    def walker(self, x):
        """Sequential evaluator along the forward orbit of x (fast path)."""
        return _GenericWalker(self, x)


@dataclass(frozen=True)
class CocycleProduct:
    value: np.ndarray
    x: object
    n: int


class ConstantCocycle(Cocycle):
    def __init__(self, base: BaseSystem, matrix: SquareMatrix):
        self.base = base
        self.matrix = matrix
        self._inv = np.linalg.inv(matrix.entries)
        self.d = matrix.d
        self.group = matrix.group

    def value(self, x) -> np.ndarray:
        return self.matrix.entries

    def value_inv(self, x) -> np.ndarray:
        return self._inv

    def sup_norm(self) -> float:
        return op_norm(self.matrix)

    def to_json(self) -> dict:
        return {"type": "constant", "base": self.base.to_json(),
                "matrix": self.matrix.to_json()}


class LocallyConstantCocycle(Cocycle):
    """Generator depends on the window x_0 .. x_{k-1}; the table must cover
    every admissible depth-k word."""

    def __init__(self, base: BaseSystem, depth: int, table: dict, group: Optional[str] = None):
        if base.kind not in (FULL_SHIFT, SFT):
            raise ValueError("locally constant cocycles need a symbolic base")
        self.base = base
        self.depth = int(depth)
        self.table = {tuple(k): (v if isinstance(v, SquareMatrix) else SquareMatrix(np.asarray(v, float)))
                      for k, v in table.items()}
        words = _admissible_words(base, self.depth)
        missing = [w for w in words if w not in self.table]
        if missing:
            raise MissingTableEntry(f"table misses {len(missing)} words, e.g. {missing[0]}")
        dims = {m.d for m in self.table.values()}
        groups = {m.group for m in self.table.values()}
        if len(dims) != 1 or len(groups) != 1:
            raise ValueError("all table matrices must share dimension and group")
        self.d = dims.pop()
        if self.d < 2:
            raise ValueError("cocycle dimension must be >= 2")
        self.group = group or groups.pop()
        self._values = {w: self.table[w].entries for w in self.table}
        self._invs = {w: np.linalg.inv(m) for w, m in self._values.items()}

    def value(self, x: ShiftPoint) -> np.ndarray:
        w = x.window(0, self.depth)
        try:
            return self._values[w]
        except KeyError:
            raise MissingTableEntry(f"no entry for window {w}") from None

    def value_inv(self, x: ShiftPoint) -> np.ndarray:
        return self._invs[x.window(0, self.depth)]

    def sup_norm(self) -> float:
        return max(op_norm(m) for m in self._values.values())

    def to_json(self) -> dict:
        return {
            "type": "locally_constant",
            "base": self.base.to_json(),
            "depth": self.depth,
            "table": {"".join(map(str, w)): SquareMatrix(m, self.group).to_json()
                      for w, m in self._values.items()},
        }


@dataclass(frozen=True)
class Patch:
    """One patch: on the cylinder, the cocycle takes `matrix`."""

    cylinder: Cylinder
    matrix: SquareMatrix

    def to_json(self) -> dict:
        return {"cylinder": self.cylinder.to_json(), "matrix": self.matrix.to_json()}


class PatchedCocycle(Cocycle):
    """Parent cocycle overridden on pairwise disjoint floor cylinders.

    `rule`, when given, is a deterministic lazy patch source (the castle
    perturbation engine); entries it materializes are appended to
    `patches` so the exhaustive distance scan sees everything evaluation
    ever used.
    """

    def __init__(self, parent: Cocycle, patches: list, rule=None, check_disjoint: bool = True):
        self.parent = parent
        self.base = parent.base
        self.d = parent.d
        self.group = parent.group
        self.patches = list(patches)
        self.rule = rule
        if check_disjoint:
            for i in range(len(self.patches)):
                for j in range(i + 1, len(self.patches)):
                    if self.patches[i].cylinder.intersects(self.patches[j].cylinder):
                        raise FloorCollision(f"patches {i} and {j} overlap")
        self._inv_cache = {}

    def value(self, x: ShiftPoint) -> np.ndarray:
        if self.rule is not None:
            hit = self.rule.lookup(x)
            if hit is not None:
                return hit
        for p in reversed(self.patches):
            if p.cylinder.contains(x):
                return p.matrix.entries
        return self.parent.value(x)

    def value_inv(self, x: ShiftPoint) -> np.ndarray:
        v = self.value(x)
        key = v.tobytes()
        inv = self._inv_cache.get(key)
        if inv is None:
            inv = np.linalg.inv(v)
            self._inv_cache[key] = inv
        return inv

    def sup_norm(self) -> float:
        out = self.parent.sup_norm()
        for p in self.patches:
            out = max(out, op_norm(p.matrix))
        return out

    def walker(self, x):
        if self.rule is not None:
            return self.rule.walker(self, x)
        return _GenericWalker(self, x)

    def patch_distance(self) -> float:
        """Exhaustive scan: max over patches of ||patch - value underneath||.

        Requires every patch cylinder to pin the parent's value, which the
        perturbation engine guarantees by refining towers to the cocycle
        depth.
        """
        worst = 0.0
        for p in self.patches:
            under = _pinned_value(self.parent, p.cylinder)
            worst = max(worst, op_norm(p.matrix.entries - under))
        return worst

    def to_json(self) -> dict:
        obj = {
            "type": "patched",
            "parent": self.parent.to_json(),
            "patches": [p.to_json() for p in self.patches],
        }
        if self.rule is not None:
            obj["rule"] = self.rule.to_json()
        return obj


def _pinned_value(cocycle: Cocycle, cyl: Cylinder) -> np.ndarray:
    """Value of a (locally constant or constant or patched) cocycle on a
    cylinder that pins its dependence window; raises if not pinned."""
    if isinstance(cocycle, ConstantCocycle):
        return cocycle.matrix.entries
    if isinstance(cocycle, LocallyConstantCocycle):
        if cyl.offset > 0 or cyl.offset + cyl.length < cocycle.depth:
            raise ValueError("patch cylinder does not pin the parent value")
        w = tuple(cyl.word[-cyl.offset: -cyl.offset + cocycle.depth])
        return cocycle._values[w]
    if isinstance(cocycle, PatchedCocycle):
        for p in reversed(cocycle.patches):
            if p.cylinder.intersects(cyl):
                if not p.cylinder.covers(cyl):
                    raise ValueError("patch cylinder straddles the query cylinder")
                return p.matrix.entries
        return _pinned_value(cocycle.parent, cyl)
    raise ValueError(f"cannot pin values of {type(cocycle).__name__}")


class ExteriorCocycle(Cocycle):
    """wedge^p of a parent cocycle, with memoized table when possible."""

    def __init__(self, parent: Cocycle, p: int):
        self.parent = parent
        self.p = p
        self.base = parent.base
        from math import comb
        self.d = comb(parent.d, p)
        self.group = parent.group
        self._cache = {}

    def _lift(self, a: np.ndarray) -> np.ndarray:
        key = a.tobytes()
        out = self._cache.get(key)
        if out is None:
            out = wedge_power(a, self.p)
            self._cache[key] = out
        return out

    def value(self, x) -> np.ndarray:
        return self._lift(self.parent.value(x))

    def value_inv(self, x) -> np.ndarray:
        return np.linalg.inv(self.value(x))

    def sup_norm(self) -> float:
        if isinstance(self.parent, ConstantCocycle):
            return op_norm(self._lift(self.parent.matrix.entries))
        if isinstance(self.parent, LocallyConstantCocycle):
            return max(op_norm(self._lift(m)) for m in self.parent._values.values())
        # patched parents: sup over parent's reachable values
        if isinstance(self.parent, PatchedCocycle):
            out = ExteriorCocycle(self.parent.parent, self.p).sup_norm()
            for q in self.parent.patches:
                out = max(out, op_norm(self._lift(q.matrix.entries)))
            return out
        raise NotImplementedError


class _GenericWalker:
    """Yields generator values along the forward orbit of x."""

    def __init__(self, cocycle: Cocycle, x):
        self.cocycle = cocycle
        self.x = x
        self.t = 0

    def next_value(self) -> np.ndarray:
        v = self.cocycle.value(self.x.shifted(self.t))
        self.t += 1
        return v


def c0_distance(a: Cocycle, b: Cocycle):
    """Uniform distance between two cocycles over the same base.

    Returns (value, exact_flag).  For table-backed pairs the max runs over
    the common cylinder refinement and is exact.  For pairs involving a
    procedural rule the value is an exhaustive scan over materialized
    patches (a certified lower bound; the rule's construction bound is the
    matching upper bound).
    """
    if a.base is not b.base and a.base.to_json() != b.base.to_json():
        raise BaseMismatch("cocycles live over different bases")
    if a.d != b.d:
        raise BaseMismatch("cocycles have different fiber dimensions")

    if isinstance(a, ConstantCocycle) and isinstance(b, ConstantCocycle):
        return op_norm(a.matrix.entries - b.matrix.entries), True

    av, aw = _table_view(a)
    bv, bw = _table_view(b)
    if av is not None and bv is not None:
        depth = max(aw, bw)
        worst = 0.0
        for w in _admissible_words(a.base, depth):
            worst = max(worst, op_norm(av(w) - bv(w)))
        return worst, True

    # procedural patched cocycle against its parent (the common case)
    if isinstance(b, PatchedCocycle) and b.parent is a:
        return b.patch_distance(), True
    if isinstance(a, PatchedCocycle) and a.parent is b:
        return a.patch_distance(), True
    raise NotImplementedError("c0 distance for this pair is not table-exact")


def _admissible_words(base: BaseSystem, depth: int):
    if depth == 0:
        return [()]
    words = [(s,) for s in range(base.n_symbols)]
    for _ in range(depth - 1):
        nxt = []
        for w in words:
            for s in range(base.n_symbols):
                if base.kind == SFT and base.adjacency[w[-1], s] == 0:
                    continue
                nxt.append(w + (s,))
        words = nxt
    return words


def _table_view(c: Cocycle):
    """(word -> matrix, depth) view for constant / locally constant / finitely
    patched cocycles; (None, None) if the cocycle has a procedural rule."""
    if isinstance(c, ConstantCocycle):
        return (lambda w: c.matrix.entries), 0
    if isinstance(c, LocallyConstantCocycle):
        return (lambda w: c._values[w[:c.depth]]), c.depth
    if isinstance(c, PatchedCocycle) and c.rule is None:
        pv, pd = _table_view(c.parent)
        if pv is None:
            return None, None
        lo = min([0] + [p.cylinder.offset for p in c.patches])
        hi = max([pd] + [p.cylinder.offset + p.cylinder.length for p in c.patches])
        if lo < 0:
            # shift-aligned patches would need two-sided windows; scan instead
            return None, None

        def view(w):
            for p in reversed(c.patches):
                seg = w[p.cylinder.offset:p.cylinder.offset + p.cylinder.length]
                if seg == p.cylinder.word:
                    return p.matrix.entries
            return pv(w)

        return view, hi
    return None, None


def cocycle_from_json(obj: dict) -> Cocycle:
    base = BaseSystem.from_json(obj["base"])
    t = obj["type"]
    if t == "constant":
        return ConstantCocycle(base, SquareMatrix.from_json(obj["matrix"]))
    if t == "locally_constant":
        table = {tuple(int(ch) for ch in w): SquareMatrix.from_json(m)
                 for w, m in obj["table"].items()}
        return LocallyConstantCocycle(base, obj["depth"], table)
    if t == "patched":
        parent = cocycle_from_json(obj["parent"])
        patches = [Patch(Cylinder.from_json(p["cylinder"]), SquareMatrix.from_json(p["matrix"]))
                   for p in obj["patches"]]
        return PatchedCocycle(parent, patches)
    raise ValueError(f"unknown cocycle type {t!r}")
