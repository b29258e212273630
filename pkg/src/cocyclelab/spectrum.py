"""Lyapunov spectrum estimation and Oseledets splitting approximation.

Estimators:

* ``top_exponent`` -- (1/n) log ||A^n(x)|| through log-scaled products.
* ``full_spectrum`` -- sequential QR on a pushed orthonormal frame; the
  log diagonal of R is averaged over the second half of the run so the
  transient of the frame alignment does not pollute the average (constant
  diagonalizable cocycles then converge exponentially, not like 1/n).
* ``oseledets_splitting`` -- the expanding space E is the orthonormal
  frame pushed up from the backward orbit (top left-singular directions of
  A^n at the past point), the contracting space F is the frame pulled back
  from the forward orbit (most contracted right-singular directions of
  A^n); both are computed with per-step re-orthonormalization so no
  horizon underflows.

The error model everywhere is the convergence half-width: the absolute
difference between the estimate at n and at n/2.  Acceptance-style bounds
are stated as bound + 3 * half-width.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log

import numpy as np

from .cocycle import Cocycle
from .errors import LostOrthogonality, NoGap
from .linalg import Subspace, subspace_angle

ORTHO_TOL = 1e-6


# -- reports -------------------------------------------------------------------

@dataclass
class SpectrumReport:
    """Estimated exponents, sorted non-increasing, with diagnostics."""

    lambdas: np.ndarray
    n_used: int
    half_widths: np.ndarray
    seeds: list = field(default_factory=list)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.half_widths = np.asarray(self.half_widths, dtype=float)
        if np.any(np.diff(self.lambdas) > 1e-12):
            raise ValueError("exponents must be sorted non-increasing")

    def gap(self, p: int) -> float:
        if not 1 <= p < len(self.lambdas):
            raise ValueError(f"gap index {p} outside 1..{len(self.lambdas) - 1}")
        return float(self.lambdas[p - 1] - self.lambdas[p])

    def gap_half_width(self, p: int) -> float:
        return float(self.half_widths[p - 1] + self.half_widths[p])

    def to_json(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "n_used": self.n_used,
            "half_widths": self.half_widths.tolist(),
            "seeds": list(self.seeds),
        }

    def csv_rows(self) -> list:
        return [
            {"index": i + 1, "lambda": float(l), "half_width": float(h)}
            for i, (l, h) in enumerate(zip(self.lambdas, self.half_widths))
        ]


@dataclass
class Splitting:
    """Candidate Oseledets splitting E + F at a point, with diagnostics."""

    x: object
    e: Subspace
    f: Subspace
    horizon: int
    stability_angle: float

    def __post_init__(self):
        if subspace_angle(self.e, self.f) <= 1e-6:
            raise ValueError("splitting angle below 1e-6: E and F are not disjoint")

    @property
    def index(self) -> int:
        return self.e.k


# -- scalar estimators -----------------------------------------------------------

def top_exponent(cocycle: Cocycle, x, n: int) -> float:
    """(1/n) log ||A^n(x)|| via overflow-safe products."""
    est, _ = top_exponent_with_half_width(cocycle, x, n)
    return est


def top_exponent_with_half_width(cocycle: Cocycle, x, n: int):
    if n < 1:
        raise ValueError("n must be >= 1")
    half_at = max(1, n // 2)
    walker = cocycle.walker(x)
    out = np.eye(cocycle.d)
    log_scale = 0.0
    est_half = None
    for j in range(1, n + 1):
        out = walker.next_value() @ out
        m = np.max(np.abs(out))
        if m > 1e120 or m < 1e-120:
            out /= m
            log_scale += log(m)
        if j == half_at:
            est_half = (log_scale + log(np.linalg.norm(out, 2))) / j
    est = (log_scale + log(np.linalg.norm(out, 2))) / n
    return est, abs(est - est_half)


def lambda_sum(cocycle: Cocycle, x, n: int, p: int) -> float:
    """Sum of the top p exponents, estimated as the top exponent of the
    p-th exterior cocycle."""
    return top_exponent(cocycle.exterior(p), x, n)


def lambda_sum_with_half_width(cocycle: Cocycle, x, n: int, p: int):
    return top_exponent_with_half_width(cocycle.exterior(p), x, n)


# -- full spectrum ----------------------------------------------------------------

def full_spectrum(cocycle: Cocycle, x, n: int, *, qr_every: int = 4,
                  burn_fraction: float = 0.5, seeds=None) -> SpectrumReport:
    """All d exponents from the averaged log diagonal of sequential QR.

    The first `burn_fraction` of the run only aligns the frame; the log
    diagonals are averaged over the remainder.  Estimates at n/2 (same
    burn-in policy) give the per-exponent convergence half-widths.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    d = cocycle.d
    walker = cocycle.walker(x)
    q = np.eye(d)
    sums = np.zeros(d)
    counted = 0
    burn = int(n * burn_fraction)
    half_mark = max(burn + 1, n // 2)
    half_est = None
    got_half = False
    buffered = 0

    def flush():
        nonlocal q, sums, counted, buffered
        q, r = np.linalg.qr(q)
        diag = np.diag(r)
        sgn = np.sign(diag)
        sgn[sgn == 0] = 1.0
        q = q * sgn
        resid = np.max(np.abs(q.T @ q - np.eye(d)))
        if resid > ORTHO_TOL:
            raise LostOrthogonality(f"re-orthonormalization residual {resid:.2e}")
        if counted_from[0] <= 0:
            sums += np.log(np.abs(diag))
            counted += buffered
        buffered = 0

    counted_from = [burn]
    for t in range(1, n + 1):
        q = walker.next_value() @ q
        buffered += 1
        if t % qr_every == 0 or t == n or t == burn or (not got_half and t >= half_mark):
            counted_from[0] = burn - t
            flush()
            if not got_half and t >= half_mark:
                got_half = True
                if counted > 0:
                    half_est = np.sort(sums / counted)[::-1]
    lambdas = np.sort(sums / counted)[::-1]
    if half_est is None:
        half_est = lambdas
    hw = np.abs(lambdas - half_est)
    return SpectrumReport(lambdas, n, hw, seeds=list(seeds or []))


def gap(report: SpectrumReport, p: int) -> float:
    """lambda_p - lambda_(p+1) of an estimated spectrum."""
    return report.gap(p)


# -- splittings --------------------------------------------------------------------

def _push_frame(values, q: np.ndarray) -> np.ndarray:
    """Push an orthonormal frame through a list of matrices with per-step QR."""
    for a in values:
        q, r = np.linalg.qr(a @ q)
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return q


def _expanding_frame(cocycle: Cocycle, x, n: int, p: int) -> np.ndarray:
    """Frame whose first p columns approximate E(x): push forward from f^-n(x)."""
    vals = [cocycle.value(x.shifted(-t)) for t in range(n, 0, -1)]
    return _push_frame(vals, np.eye(cocycle.d))[:, :p]


def _contracting_frame(cocycle: Cocycle, x, n: int, p: int) -> np.ndarray:
    """Frame whose first d-p columns approximate F(x): pull back from f^n(x)."""
    vals = [cocycle.value_inv(x.shifted(t)) for t in range(n - 1, -1, -1)]
    return _push_frame(vals, np.eye(cocycle.d))[:, : cocycle.d - p]


def oseledets_splitting(cocycle: Cocycle, x, n: int, p: int, *,
                        require_gap: bool = True,
                        spectrum: SpectrumReport = None) -> Splitting:
    """Approximate index-p Oseledets splitting at x.

    F(x) spans the d-p most contracted forward directions; E(x) spans the
    p most expanded directions of the product over the backward orbit.
    The stability angle compares horizons n/2 and n.  When `require_gap`
    is set, the estimated gap must exceed three times its convergence
    half-width, otherwise NoGap is raised.
    """
    if require_gap:
        rep = spectrum if spectrum is not None else full_spectrum(cocycle, x, max(n, 16))
        if rep.gap(p) < 3.0 * rep.gap_half_width(p):
            raise NoGap(
                f"gap {rep.gap(p):.3e} below 3 x half-width {rep.gap_half_width(p):.3e}")
    e_full = _expanding_frame(cocycle, x, n, p)
    f_full = _contracting_frame(cocycle, x, n, p)
    e_half = _expanding_frame(cocycle, x, max(1, n // 2), p)
    f_half = _contracting_frame(cocycle, x, max(1, n // 2), p)
    stability = max(
        frame_distance_angle(e_full, e_half),
        frame_distance_angle(f_full, f_half),
    )
    return Splitting(x, Subspace(e_full), Subspace(f_full), n, stability)


def frame_distance_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Largest principal angle between equal-dimension frames."""
    s = np.linalg.svd(np.asarray(a).T @ np.asarray(b), compute_uv=False)
    c = max(-1.0, min(1.0, float(s[-1])))
    return float(np.arccos(c))


def equivariance_residual(cocycle: Cocycle, x, n: int, p: int) -> float:
    """Angle between A(x) E(x) and E(f x), both estimated at horizon n."""
    sx = oseledets_splitting(cocycle, x, n, p, require_gap=False)
    sfx = oseledets_splitting(cocycle, x.shifted(1), n, p, require_gap=False)
    pushed = cocycle.value(x) @ sx.e.frame
    q, _ = np.linalg.qr(pushed)
    return frame_distance_angle(q, sfx.e.frame)


# -- ensembles ----------------------------------------------------------------------

def ensemble_top_exponent(cocycle: Cocycle, seeds, n: int):
    """Per-seed top-exponent estimates with half-widths, plus mean and SE."""
    ests, hws = [], []
    for s in seeds:
        x = cocycle.base.sample_point(s)
        e, h = top_exponent_with_half_width(cocycle, x, n)
        ests.append(e)
        hws.append(h)
    ests = np.array(ests)
    se = float(np.std(ests, ddof=1) / np.sqrt(len(ests))) if len(ests) > 1 else 0.0
    return {
        "per_seed": ests.tolist(),
        "half_widths": hws,
        "mean": float(np.mean(ests)),
        "stderr": se,
        "n": n,
        "seeds": list(seeds),
    }
