"""Zero counting and location for shifted kernels in the left half-plane.

The counting contour is the segment Re xi = -eps closed by a left arc,
traversed counterclockwise; its winding number equals the number of enclosed
zeros.  Kernels that clear to a polynomial get their roots from a companion
solve; the rest go through quadtree subdivision driven by rectangle winding
numbers.  Either way the count is certified independently by the argument
principle on the uncleared kernel and the roots by their residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contour import _eval_density
from .errors import (
    CountMismatch,
    NonIntegerWinding,
    PreconditionViolated,
    ZeroOnContour,
)
from .model import RationalKernel

__all__ = ["RootReport", "count_left_zeros", "find_kernel_roots", "verify_rouche"]

_AXIS_TOL = 1e-9   # roots closer to the axis than this count as on-axis


@dataclass(frozen=True)
class RootReport:
    """Certified left-half-plane roots of one shifted kernel."""

    roots: tuple
    residuals: tuple
    count_argument_principle: int
    contour_radius: float
    contour_offset_eps: float

    def __post_init__(self) -> None:
        if len(self.roots) != self.count_argument_principle:
            raise ValueError("root list length disagrees with certified count")
        if len(self.roots) != len(self.residuals):
            raise ValueError("residual list length disagrees with root list")
        if not self.contour_offset_eps > 0:
            raise ValueError("contour offset must be positive")
        for r in self.roots:
            if not r.real < -self.contour_offset_eps / 2:
                raise ValueError(f"root {r:.6g} is not safely inside the left half-plane")


class _BudgetExceeded(NonIntegerWinding):
    """Refinement wants more samples than the seed density justifies."""


def _cycle_winding(F, to_point, n0: int = 256, max_rounds: int = 48) -> int:
    """Winding number of F along a closed curve, by adaptive phase tracking.

    to_point maps parameters in [0, 1) onto the curve; intervals whose
    complex-log step (phase and magnitude ratio jointly) exceeds 0.8 are
    bisected until every step is resolved.  Watching the magnitude as well as
    the phase matters: a zero just off the curve concentrates a near-pi swing
    in a window far narrower than any fixed sampling, where the wrapped phase
    step alone can alias to something small, but the |F| dip cannot.

    Refinement is capped at a few multiples of the seed count: a curve that
    wants more is either undersampled (reseed denser), grazing a zero, or
    inside rounding noise where extra points only breed more unresolved
    steps, so grinding on would cost exponentially and settle nothing.
    """
    def fail(vals: np.ndarray, budget: bool = False) -> Exception:
        # classify the failure; a contour zero drags refined samples toward
        # it, so min|F| collapses relative to the curve's typical magnitude
        mags = np.abs(vals)
        if float(mags.min()) < max(1e-12 * float(np.median(mags)), 1e-280):
            return ZeroOnContour("kernel magnitude vanishes on the counting contour")
        if budget:
            return _BudgetExceeded("phase refinement exceeded its sample budget")
        return NonIntegerWinding("phase steps failed to resolve under bisection")

    budget = 8 * n0 + 1024
    ts = np.linspace(0.0, 1.0, n0, endpoint=False)
    vals = _eval_density(F, to_point(ts))
    for _ in range(max_rounds):
        if float(np.abs(vals).min()) < 1e-280:
            raise ZeroOnContour("kernel magnitude vanishes on the counting contour")
        ratio = np.roll(vals, -1) / vals
        steps = np.angle(ratio)
        metric = np.hypot(np.log(np.abs(ratio)), steps)
        bad = ~np.isfinite(metric) | (metric > 0.8)
        if not bad.any():
            total = float(np.sum(steps)) / (2.0 * math.pi)
            if abs(total - round(total)) > 0.1:
                err = fail(vals)
                if isinstance(err, ZeroOnContour):
                    raise err
                raise NonIntegerWinding(
                    f"accumulated argument / 2 pi = {total:.4f} is not an integer")
            return int(round(total))
        if ts.size + int(bad.sum()) > budget:
            raise fail(vals, budget=True)
        nxt = np.concatenate([ts[1:], [1.0]])
        mids = 0.5 * (ts[bad] + nxt[bad])
        mid_vals = _eval_density(F, to_point(mids))
        ts = np.concatenate([ts, mids])
        vals = np.concatenate([vals, mid_vals])
        order = np.argsort(ts, kind="stable")
        ts, vals = ts[order], vals[order]
    raise fail(vals)


def _verified_winding(F, to_point, n0: int) -> int:
    """Winding with a sampling-density certificate.

    The adaptive refinement in _cycle_winding can be fooled when an entire
    near-pi swing and its matching |F| dip both hide strictly between two
    seed samples; reseeding 4x denser moves the sample grid into any such
    window, so two consecutive densities agreeing certifies the count.
    """
    prev: int | None = None
    while True:
        try:
            got = _cycle_winding(F, to_point, n0=n0)
        except _BudgetExceeded:
            got = None  # structure finer than the seeds; only density helps
        if got is not None and got == prev:
            return got
        if n0 >= 32768:
            raise NonIntegerWinding(
                "winding number keeps changing under sampling refinement")
        prev, n0 = got, n0 * 4


def count_left_zeros(F, radius: float, eps: float) -> int:
    """Zeros of F (with multiplicity) in {Re xi < -eps, |xi| < radius}.

    F must be analytic on and inside the contour and zero-free on it.
    """
    if not (math.isfinite(radius) and math.isfinite(eps) and radius > eps > 0):
        raise ValueError("need radius > eps > 0")
    h = math.sqrt(radius * radius - eps * eps)
    phi = math.asin(eps / radius)

    def to_point(ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts)
        pts = np.empty(ts.shape, dtype=complex)
        seg = ts < 0.5
        pts[seg] = -eps + 1j * (-h + 4.0 * h * ts[seg])
        th = (math.pi / 2 + phi) + (ts[~seg] - 0.5) * 2.0 * (math.pi - 2 * phi)
        pts[~seg] = radius * np.exp(1j * th)
        return pts

    # seed finely enough that a dip from a zero at distance ~eps off the
    # segment cannot fall between samples
    n0 = int(min(16384, max(256, 16.0 * radius / eps)))
    return _verified_winding(F, to_point, n0)


def _rect_winding(F, x0: float, x1: float, y0: float, y1: float,
                  n0: int = 128, verify: bool = True) -> int:
    corners = np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1])

    def to_point(ts: np.ndarray) -> np.ndarray:
        u = np.asarray(ts) * 4.0
        k = np.minimum(u.astype(int), 3)
        frac = u - k
        start = corners[k]
        return start + frac * (corners[(k + 1) % 4] - start)

    if verify:
        return _verified_winding(F, to_point, n0)
    return _cycle_winding(F, to_point, n0=n0)


_SPLIT_ATTEMPTS = ((0.5, 0.5), (0.43, 0.57), (0.57, 0.43), (0.52, 0.48))


def _noise_floor(kernel: RationalKernel, z: complex, s: complex):
    """Rounding-noise scale of eval_shifted: machine eps times the Horner
    recursion run on absolute values."""
    def floor(pts: np.ndarray) -> float:
        pts = np.asarray(pts, dtype=complex)
        s2 = s - pts
        r = np.abs(pts)
        acc2 = np.zeros(r.shape)
        for c in kernel.h2_coeffs:
            acc2 = acc2 * r + np.abs(np.asarray(c(s2), dtype=complex))
        acc1 = np.zeros(r.shape)
        for c in kernel.h1_coeffs:
            acc1 = acc1 * r + np.abs(np.asarray(c(s2), dtype=complex))
        return 2.3e-16 * float(np.max(acc2 + abs(z) * acc1))
    return floor


def _subdivide(F, x0, x1, y0, y1, count, out, floor_fn=None) -> None:
    """Quadtree descent: push `count` root locations for this rectangle."""
    if count == 0:
        return
    if math.hypot(x1 - x0, y1 - y0) < 5e-4:
        out.extend([complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))] * count)
        return
    def noise_merged() -> bool:
        # a box inside the cancellation noise of the coefficient arithmetic
        # holds roots that are numerically coincident; the certified count at
        # the box center is then the best answer that exists
        if floor_fn is None:
            return False
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        if math.hypot(x1 - x0, y1 - y0) >= 0.1 * (1.0 + math.hypot(cx, cy)):
            return False
        pts = np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1,
                        cx + 1j * y0, cx + 1j * y1, x0 + 1j * cy, x1 + 1j * cy,
                        cx + 1j * cy])
        return float(np.max(np.abs(_eval_density(F, pts)))) < \
            floor_fn(pts) * 16.0 ** count

    last_err: Exception | None = None
    for n0 in (128, 1024, 8192):
        for fx, fy in _SPLIT_ATTEMPTS:
            xm = x0 + fx * (x1 - x0)
            ym = y0 + fy * (y1 - y0)
            quads = ((x0, xm, y0, ym), (xm, x1, y0, ym),
                     (x0, xm, ym, y1), (xm, x1, ym, y1))
            try:
                counts = [_rect_winding(F, *q, n0=n0, verify=False)
                          for q in quads]
            except (ZeroOnContour, NonIntegerWinding) as err:
                last_err = err  # split line grazed a zero; nudge and retry
                continue
            if sum(counts) != count:
                # a zero very near a child edge can alias; denser seeds or a
                # nudged split line both cure it
                last_err = CountMismatch(
                    "child rectangle counts do not add up",
                    expected=count, found=sum(counts))
                continue
            found: list[complex] = []
            try:
                for q, c in zip(quads, counts):
                    _subdivide(F, *q, c, found, floor_fn)
            except (CountMismatch, ZeroOnContour, NonIntegerWinding) as err:
                # a descendant split contradicted this level's counts, so one
                # of them aliased; denser seeds here resolve which
                last_err = err
                continue
            out.extend(found)
            return
        if noise_merged():
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            out.extend([complex(cx, cy)] * count)
            return
    raise last_err if last_err is not None else CountMismatch("subdivision failed")


def _newton(F, x0: complex, tol_scale: float) -> complex:
    x = complex(x0)
    fx = complex(F(x))
    for _ in range(40):
        if abs(fx) <= 1e-15 * tol_scale:
            break
        d = 1e-6 * (1.0 + abs(x))
        fp = (complex(F(x + d)) - complex(F(x - d))) / (2.0 * d)
        if fp == 0:
            break
        step = fx / fp
        cand, fc = x, fx
        for _ in range(10):
            cand = x - step
            fc = complex(F(cand))
            if abs(fc) <= abs(fx):
                break
            step *= 0.5
        if abs(fc) >= abs(fx):
            break
        moved = abs(cand - x)
        x, fx = cand, fc
        if moved < 1e-15 * (1.0 + abs(x)):
            break
    return x


def _trim_poly(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    mags = np.abs(p)
    keep = mags > 1e-12 * mags.max()
    return p[int(np.argmax(keep)):]


def _check_count_domain(z: complex, s: complex, stable_drift) -> None:
    if s.real < -1e-12:
        raise PreconditionViolated("Re s must be nonnegative")
    az = abs(z)
    if az < 1.0 - 1e-12:
        return
    if az > 1.0 + 1e-12:
        raise PreconditionViolated("|z| must not exceed 1")
    if s.real > 1e-12:
        return
    if abs(z - 1.0) <= 1e-12 and stable_drift:
        return
    raise PreconditionViolated(
        "|z| = 1 with Re s = 0 is covered only for z = 1 on models with "
        "E B < E A (pass stable_drift=True)")


def _shifted(kernel: RationalKernel, z: complex, s: complex):
    def F(xi):
        return kernel.eval_shifted(xi, z, s)
    return F


def _coeff_bound(kernel: RationalKernel, z: complex, s: complex) -> float:
    # Cauchy-style magnitude bound sampled where s2 = s - xi actually lives
    # (Re s2 >= Re s along the left contour).
    probes = s + np.array([0.01, 1.0, 5.0, 20.0, 100.0,
                           0.01 + 3j, 0.01 - 3j, 1.0 + 10j, 1.0 - 10j])
    worst = 0.0
    for c in kernel.h2_coeffs[1:]:
        worst = max(worst, float(np.max(np.abs(np.asarray(c(probes), dtype=complex)))))
    for c in kernel.h1_coeffs:
        worst = max(worst, abs(z) * float(np.max(np.abs(np.asarray(c(probes), dtype=complex)))))
    return worst


def _locate_approx(kernel: RationalKernel, z: complex, s: complex) -> list[complex]:
    if kernel.clear_fn is not None:
        poly = _trim_poly(kernel.clear(z, s))
        roots = np.roots(poly) if len(poly) > 1 else np.array([])
        return [complex(r) for r in roots if r.real < -_AXIS_TOL]
    F = _shifted(kernel, z, s)
    R = 2.0 * (1.0 + _coeff_bound(kernel, z, s))
    total = None
    for _ in range(6):
        inner = _rect_winding(F, -R, -1e-6, -R, R)
        outer = _rect_winding(F, -2 * R, -1e-6, -2 * R, 2 * R)
        if inner == outer:
            total = inner
            break
        R *= 2.0
    if total is None:
        raise CountMismatch("enclosing rectangle count failed to stabilize")
    out: list[complex] = []
    _subdivide(F, -R, -1e-6, -R, R, total, out, _noise_floor(kernel, z, s))
    return out


def _contour_params(roots) -> tuple[float, float]:
    if roots:
        eps = min(min(-r.real for r in roots) / 2.0, 0.05)
        radius = 2.0 * (1.0 + max(abs(r) for r in roots))
    else:
        eps, radius = 0.01, 4.0
    return max(eps, 1e-9), radius


def _stable_count(F, radius: float, eps: float) -> tuple[int, float]:
    """Count at growing radii until two consecutive doublings agree."""
    counts: list[int] = []
    for _ in range(10):
        counts.append(count_left_zeros(F, radius, eps))
        if len(counts) >= 3 and counts[-1] == counts[-2] == counts[-3]:
            return counts[-1], radius
        radius *= 2.0
    raise CountMismatch("zero count failed to stabilize under radius doubling")


def find_kernel_roots(kernel: RationalKernel, z: complex, s: complex,
                      stable_drift: bool | None = None) -> RootReport:
    """All open-left-half-plane roots of h2(xi, s-xi) - z*h1(xi, s-xi).

    The count is certified against the argument principle and every root
    against its kernel residual.  Outside the regimes where the root count is
    guaranteed, raises PreconditionViolated; z = 1 with Re s = 0 additionally
    needs the caller to assert negative drift via stable_drift=True.
    """
    z, s = complex(z), complex(s)
    _check_count_domain(z, s, stable_drift)
    F = _shifted(kernel, z, s)
    approx = _locate_approx(kernel, z, s)
    scale = max(1.0, abs(complex(F(0.0))))
    refined = [_newton(F, r, scale) for r in approx]
    refined = [r for r in refined if r.real < -_AXIS_TOL]
    refined.sort(key=lambda r: (r.real, r.imag))
    eps, radius = _contour_params(refined)
    n_ap, radius = _stable_count(F, radius, eps)
    if n_ap != len(refined):
        raise CountMismatch(
            f"located {len(refined)} roots but the argument principle counts {n_ap}",
            expected=n_ap, found=len(refined))
    residuals = tuple(abs(complex(F(r))) for r in refined)
    bad = [r for r, res in zip(refined, residuals) if res >= 1e-8 * scale]
    if bad:
        raise CountMismatch(
            f"root {bad[0]:.8g} failed residual certification", expected=n_ap,
            found=len(refined) - len(bad))
    return RootReport(roots=tuple(refined), residuals=residuals,
                      count_argument_principle=n_ap,
                      contour_radius=radius, contour_offset_eps=eps)


def verify_rouche(kernel: RationalKernel, z: complex, s: complex,
                  stable_drift: bool | None = None) -> tuple[int, int, bool]:
    """Independent left-zero counts of h2(xi, s-xi) and of the z-shifted kernel."""
    z, s = complex(z), complex(s)
    _check_count_domain(z, s, stable_drift)
    counts = []
    for zz in (0.0, z):
        F = _shifted(kernel, zz, s)
        eps, radius = _contour_params(_locate_approx(kernel, zz, s))
        counts.append(_stable_count(F, radius, eps)[0])
    return counts[0], counts[1], counts[0] == counts[1]
