"""Dense small-dimension matrix and subspace algebra.

Everything downstream (cocycle iteration, spectrum estimation, the
perturbation constructions) flows through the operations in this module:
operator and minimum norms, exterior powers, principal angles, plane
rotations, hyperbolic maps expressed in a skew basis, and block norms with
respect to a pair of oblique splittings.

Matrices are plain float64 numpy arrays wrapped in :class:`SquareMatrix`
with a group tag.  The design envelope is d <= 12, so all decompositions
use dense LAPACK routines without further thought.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import cos, sin

import numpy as np

from .errors import (
    BadExponent,
    CollinearInputs,
    DegenerateSplitting,
    SingularMatrix,
)

DET_SCALED_TOL = 1e-12     # on |det| / sigma_max^d
SL_DET_TOL = 1e-9
FRAME_ORTHO_TOL = 1e-10
SPLITTING_ANGLE_FLOOR = 1e-8

GROUP_GL = "GL"
GROUP_SL = "SL"


def _as_array(m) -> np.ndarray:
    if isinstance(m, SquareMatrix):
        return m.entries
    return np.asarray(m, dtype=float)


@dataclass(frozen=True)
class SquareMatrix:
    """A d x d real matrix with a matrix-group tag ("GL" or "SL").

    Invariants (checked on construction):
      * invertibility: |det| / sigma_max^d > 1e-12,
      * SL tag: |det - 1| <= 1e-9.
    """

    entries: np.ndarray
    group: str = GROUP_GL

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        # d >= 2 is the envelope for cocycle generators; d = 1 is allowed here
        # because top exterior powers are 1 x 1.
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected square matrix, got shape {a.shape}")
        object.__setattr__(self, "entries", a)
        if self.group not in (GROUP_GL, GROUP_SL):
            raise ValueError(f"unknown group tag {self.group!r}")
        det = float(np.linalg.det(a))
        scale = float(np.linalg.norm(a, 2)) ** a.shape[0]
        if scale == 0.0 or abs(det) / scale <= DET_SCALED_TOL:
            raise SingularMatrix(f"condition-scaled determinant {det/scale if scale else 0.0:.3e} below tolerance")
        if self.group == GROUP_SL and abs(det - 1.0) > SL_DET_TOL:
            raise SingularMatrix(f"SL tag but det = {det!r}")

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "SquareMatrix") -> "SquareMatrix":
        g = GROUP_SL if self.group == GROUP_SL and other.group == GROUP_SL else GROUP_GL
        return SquareMatrix(self.entries @ other.entries, g)

    def inv(self) -> "SquareMatrix":
        return SquareMatrix(np.linalg.inv(self.entries), self.group)

    def to_json(self) -> dict:
        return {"group": self.group, "entries": self.entries.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "SquareMatrix":
        return SquareMatrix(np.array(obj["entries"], dtype=float), obj.get("group", GROUP_GL))


@dataclass(frozen=True)
class Subspace:
    """A k-dimensional subspace of R^d given by an orthonormal frame.

    The frame is a d x k array whose columns are orthonormal within 1e-10.
    """

    frame: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=float)
        if f.ndim == 1:
            f = f.reshape(-1, 1)
        gram = f.T @ f
        if np.max(np.abs(gram - np.eye(f.shape[1]))) > FRAME_ORTHO_TOL:
            raise ValueError("frame columns are not orthonormal")
        object.__setattr__(self, "frame", f)

    @property
    def d(self) -> int:
        return self.frame.shape[0]

    @property
    def k(self) -> int:
        return self.frame.shape[1]

    @staticmethod
    def from_spanning(vectors: np.ndarray) -> "Subspace":
        """Orthonormalize the columns of `vectors` (must have full rank)."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        q, r = np.linalg.qr(v)
        if np.min(np.abs(np.diag(r))) < 1e-13 * max(1.0, np.max(np.abs(v))):
            raise ValueError("spanning set is rank deficient")
        return Subspace(q)


@dataclass(frozen=True)
class BlockSplittingPair:
    """Domain and codomain splittings R^d = E0 + F0 and R^d = E1 + F1.

    Both pairs must span the whole space with a positive minimal angle;
    dimensions must be complementary.
    """

    domain_split: tuple
    codomain_split: tuple
    min_angle: float = field(init=False)

    def __post_init__(self):
        for e, f in (self.domain_split, self.codomain_split):
            if e.d != f.d or e.k + f.k != e.d:
                raise ValueError("splitting dimensions are not complementary")
        a0 = subspace_angle(*self.domain_split)
        a1 = subspace_angle(*self.codomain_split)
        object.__setattr__(self, "min_angle", min(a0, a1))


# -- norms ---------------------------------------------------------------------

def op_norm(m) -> float:
    """Operator norm: the largest singular value."""
    return float(np.linalg.norm(_as_array(m), 2))


def min_norm(m) -> float:
    """Induced lower bound norm ||M^-1||^-1: the smallest singular value."""
    a = _as_array(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0 or s[-1] / s[0] <= DET_SCALED_TOL:
        raise SingularMatrix("matrix is singular to working precision")
    return float(s[-1])


# -- exterior powers -----------------------------------------------------------

def wedge_indices(d: int, p: int):
    """Lexicographically ordered p-element index sets of {0..d-1}."""
    return list(combinations(range(d), p))


def wedge_power(m, p: int):
    """Induced map on the p-th exterior power, as a C(d,p) x C(d,p) matrix.

    Entry (I, J) is the p x p minor det(M[I, J]) with multi-indices in
    lexicographic order, so columns are images of the wedge basis:
    (wedge^p M)(e_J) = sum_I det(M[I,J]) e_I.
    """
    a = _as_array(m)
    d = a.shape[0]
    if not 1 <= p <= d:
        raise BadExponent(f"p = {p} outside 1..{d}")
    idx = wedge_indices(d, p)
    n = len(idx)
    out = np.empty((n, n), dtype=float)
    for j, cols in enumerate(idx):
        sub = a[:, cols]
        for i, rows in enumerate(idx):
            out[i, j] = np.linalg.det(sub[rows, :])
    if isinstance(m, SquareMatrix):
        # SL is preserved: det(wedge^p M) = det(M)^C(d-1, p-1).
        return SquareMatrix(out, m.group)
    return out


def wedge_apply(m, frame: np.ndarray, p: int) -> np.ndarray:
    """Image of the wedge of `frame`'s columns under wedge_power(m, p),
    computed directly as minors of m @ frame (cheaper than full wedge)."""
    a = _as_array(m)
    img = a @ frame
    idx = wedge_indices(a.shape[0], p)
    return np.array([np.linalg.det(img[rows, :]) for rows in idx])


def wedge_of_frame(frame: np.ndarray) -> np.ndarray:
    """Coordinates of v_1 ^ ... ^ v_p in the lexicographic wedge basis."""
    f = np.asarray(frame, dtype=float)
    if f.ndim == 1:
        f = f.reshape(-1, 1)
    idx = wedge_indices(f.shape[0], f.shape[1])
    return np.array([np.linalg.det(f[rows, :]) for rows in idx])


# -- angles and adapted maps ----------------------------------------------------

def subspace_angle(u: Subspace, w: Subspace) -> float:
    """Minimal principal angle between two subspaces, in [0, pi/2].

    Computed as arccos of the largest singular value of U^T W.  With
    disjoint spans this is the smallest angle any unit vector of U makes
    with W, which is the convention the block-norm bounds need.
    """
    if u.k + w.k > u.d:
        raise ValueError("subspaces cannot be disjoint: dimensions exceed d")
    s = np.linalg.svd(u.frame.T @ w.frame, compute_uv=False)
    c = min(1.0, float(s[0])) if s.size else 0.0
    return float(np.arccos(c))


def vector_angle(v: np.ndarray, w: np.ndarray) -> float:
    """Unsigned angle between two nonzero vectors, in [0, pi]."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    nv = np.linalg.norm(v)
    nw = np.linalg.norm(w)
    if nv == 0.0 or nw == 0.0:
        raise CollinearInputs("zero vector has no direction")
    c = float(np.dot(v, w) / (nv * nw))
    c = max(-1.0, min(1.0, c))
    return float(np.arccos(c))


def line_angle(v: np.ndarray, w: np.ndarray) -> float:
    """Angle between the lines spanned by v and w, in [0, pi/2]."""
    a = vector_angle(v, w)
    return min(a, np.pi - a)


def _plane_frame(u: np.ndarray, v: np.ndarray):
    """Orthonormal (e1, e2) with e1 along u and e2 in span(u, v), oriented
    from u toward v.  Raises CollinearInputs when the span degenerates."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    if nu == 0.0:
        raise CollinearInputs("zero vector")
    e1 = u / nu
    w = v - np.dot(v, e1) * e1
    nw = np.linalg.norm(w)
    if nw <= 1e-12 * np.linalg.norm(v):
        raise CollinearInputs("vectors are numerically collinear")
    return e1, w / nw


def plane_rotation(u: np.ndarray, v: np.ndarray, angle: float) -> SquareMatrix:
    """Rotation by `angle` inside span(u, v), identity on the complement.

    The rotation is oriented from u toward v: for angle = the (u, v) angle
    it carries the direction of u onto the direction of v.  det = 1.
    """
    e1, e2 = _plane_frame(u, v)
    d = e1.shape[0]
    c, s = cos(angle), sin(angle)
    r = np.eye(d)
    r += (c - 1.0) * (np.outer(e1, e1) + np.outer(e2, e2))
    r += s * (np.outer(e2, e1) - np.outer(e1, e2))
    return SquareMatrix(r, GROUP_SL)


def rotation_defect(angle: float) -> float:
    """Exact operator norm of (plane rotation by angle) - identity."""
    return 2.0 * abs(sin(angle / 2.0))


def _basis_with_complement(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Change-of-basis matrix [v | w | orthonormal complement of span(v,w)]."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    e1, e2 = _plane_frame(v, w)
    d = v.shape[0]
    m = np.empty((d, d))
    m[:, 0] = v
    m[:, 1] = w
    if d > 2:
        # complement via full QR of the plane frame
        q, _ = np.linalg.qr(np.column_stack([e1, e2, np.eye(d)]))
        m[:, 2:] = q[:, 2:d]
    return m


def hyperbolic_in_basis(v: np.ndarray, w: np.ndarray, eps1: float) -> SquareMatrix:
    """The map that is diag(1/(1+eps1), 1+eps1, I) in the basis
    {v, w, orthonormal complement of span(v, w)}.

    It contracts the v direction, expands the w direction, fixes the
    complement, and has det = 1 for any eps1 > -1.  The matrix does not
    depend on the normalization of v and w.
    """
    if eps1 < 0:
        raise ValueError("eps1 must be nonnegative")
    m = _basis_with_complement(v, w)
    d = m.shape[0]
    diag = np.ones(d)
    diag[0] = 1.0 / (1.0 + eps1)
    diag[1] = 1.0 + eps1
    h = m @ (diag[:, None] * np.linalg.inv(m))
    return SquareMatrix(h, GROUP_SL)


def basis_condition(v: np.ndarray, w: np.ndarray) -> float:
    """Condition number ||M|| ||M^-1|| of the change of basis to
    {v, w, complement} for unit non-collinear v, w.

    Equals cot(angle(v, w)/2) for this construction: the complement block
    contributes singular value 1 and the [v w] block contributes
    sqrt(1 +- cos(angle)).
    """
    m = _basis_with_complement(
        np.asarray(v, float) / np.linalg.norm(v),
        np.asarray(w, float) / np.linalg.norm(w),
    )
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= 0:
        raise CollinearInputs("degenerate basis")
    return float(s[0] / s[-1])


# -- block norms ----------------------------------------------------------------

def split_blocks(t, splits: BlockSplittingPair):
    """The four blocks of t with respect to oblique domain/codomain splittings.

    Domain vectors are expanded in the (E0, F0) frames; images are
    decomposed along E1 and F1 by the oblique projection determined by the
    codomain splitting.  Because frames are orthonormal within each
    subspace, each block's 2-norm is its operator norm between subspaces.
    """
    if splits.min_angle < SPLITTING_ANGLE_FLOOR:
        raise DegenerateSplitting(f"splitting angle {splits.min_angle:.2e} below 1e-8")
    e0, f0 = splits.domain_split
    e1, f1 = splits.codomain_split
    a = _as_array(t)
    s1 = np.column_stack([e1.frame, f1.frame])
    coords = np.linalg.solve(s1, a @ np.column_stack([e0.frame, f0.frame]))
    p1, p0 = e1.k, e0.k
    return (
        coords[:p1, :p0],      # ++ : E0 -> E1
        coords[:p1, p0:],      # +- : F0 -> E1
        coords[p1:, :p0],      # -+ : E0 -> F1
        coords[p1:, p0:],      # -- : F0 -> F1
    )


def block_max_norm(t, splits: BlockSplittingPair) -> float:
    """max of the operator norms of the four oblique blocks of t."""
    return max(float(np.linalg.norm(b, 2)) if b.size else 0.0 for b in split_blocks(t, splits))


# -- random constructions (shared by tests and instance generators) --------------

def random_special_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_group_matrix(rng: np.random.Generator, d: int, group: str,
                        log_sigma_scale: float = 0.4) -> SquareMatrix:
    """Random element with singular values exp(N(0, scale)), det sign +.

    SL matrices are rescaled to determinant one.
    """
    u = random_special_orthogonal(rng, d)
    v = random_special_orthogonal(rng, d)
    sig = np.exp(log_sigma_scale * rng.standard_normal(d))
    a = u @ (sig[:, None] * v.T)
    if group == GROUP_SL:
        a = a / abs(np.linalg.det(a)) ** (1.0 / d)
    return SquareMatrix(a, group)
