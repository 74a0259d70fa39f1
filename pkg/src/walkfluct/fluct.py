"""Fluctuation transforms of the reflected walk and its first descent.

Every functional is available through two engines.  The contour engine turns
the principal-value representations into quadrature on the imaginary axis and
works for any model; the rational engine multiplies out left-root products and
is exact (up to root residuals) for models carrying a RationalKernel.  The
orientation of the axis integrals, including the sign of the semicircular
correction, is frozen by convention tests against the M/M/1 closed forms.

Branch handling: for |z| < 1 the kernels 1 - z h stay inside the disc of
radius |z| around 1, so the principal logarithm is already continuous along
each half-axis.  The default "anchored_principal" mode additionally unwraps
the phase along the sweep and re-anchors it at the far endpoint, where the
kernel tends to 1; this keeps the densities continuous even when |z h| comes
close to 1.
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .contour import ContourSpec, TransformValue, _extrapolate, pv_axis, pv_axis_singular
from .errors import DomainError, NoConvergence, StabilityError, UnsupportedModel
from .model import IncrementModel, RationalKernel, increment_char, lst_eval
from .roots import find_kernel_roots

__all__ = [
    "WalkFunctionals", "walk_functionals",
    "busy_period_transform", "idle_period_transform", "steps_pgf",
    "transient_max_transform",
    "busy_period_rational", "max_transform_rational", "steps_pgf_rational",
    "wienerhopf_factors", "invert_to_distribution", "geometric_limit",
]

_TWO_PI = 2.0 * math.pi
_TWO_PI_I = 2j * math.pi

STABLE = "stable"
CRITICAL = "critical"
UNSTABLE = "unstable"

_CONTOUR_MODES = ("anchored_principal", "principal")


def _classify(mean_b: float, mean_a: float) -> str:
    tol = 1e-12 * (1.0 + abs(mean_a) + abs(mean_b))
    if mean_b < mean_a - tol:
        return STABLE
    if mean_b > mean_a + tol:
        return UNSTABLE
    return CRITICAL


@dataclass(frozen=True)
class WalkFunctionals:
    """An increment model bundled with its drift regime and branch conventions."""

    model: IncrementModel
    stability: str
    conventions: Mapping[str, str] = field(
        default_factory=lambda: {"contour": "anchored_principal", "rational": "exact"})

    def __post_init__(self) -> None:
        if self.stability != _classify(self.model.mean_b, self.model.mean_a):
            raise ValueError("stability label disagrees with the model means")
        if self.conventions.get("contour", "anchored_principal") not in _CONTOUR_MODES:
            raise ValueError(f"unknown contour log-branch mode, use one of {_CONTOUR_MODES}")


def walk_functionals(model: IncrementModel,
                     conventions: Mapping[str, str] | None = None) -> WalkFunctionals:
    if conventions is None:
        return WalkFunctionals(model, _classify(model.mean_b, model.mean_a))
    return WalkFunctionals(model, _classify(model.mean_b, model.mean_a), conventions)


def _tracked_log(w: np.ndarray, mode: str) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if mode == "anchored_principal" and w.size > 1:
        phase = np.unwrap(np.angle(w))
        phase -= _TWO_PI * np.round(phase[-1] / _TWO_PI)
        return np.log(np.abs(w)) + 1j * phase
    return np.log(w)


def _phi1(wf: WalkFunctionals, z: complex) -> Callable[[np.ndarray], np.ndarray]:
    """log(1 - z h(xi, -xi)) with branch continuation along each half-axis."""
    mode = wf.conventions.get("contour", "anchored_principal")

    def phi(xi):
        xi = np.asarray(xi, dtype=complex)
        return _tracked_log(1.0 - z * increment_char(wf.model, xi), mode)

    return phi


def _check_interior(z: complex, s: complex | None) -> None:
    if abs(z) >= 1.0:
        raise DomainError("|z| must be strictly below 1 for the contour engine")
    if s is not None and s.real <= 0.0:
        raise DomainError("Re s must be strictly positive for the contour engine")


def _pole_refinement(s: complex) -> tuple[float, float]:
    return (s.imag, max(abs(s.real), 1e-3))


def busy_period_transform(wf: WalkFunctionals, z: complex, s: complex,
                          spec: ContourSpec) -> TransformValue:
    """Joint transform E[z^N e^{-sP}] of the descent count and its b-total.

    The kernel-at-s exponent term is folded in closed form as
    log(1 - z h(s,0)); only the shifted term is integrated.
    """
    z, s = complex(z), complex(s)
    _check_interior(z, s)
    if z == 0:
        return TransformValue(0j, 0.0, "contour")
    mode = wf.conventions.get("contour", "anchored_principal")
    model = wf.model

    def density(xi):
        xi = np.asarray(xi, dtype=complex)
        return _tracked_log(1.0 - z * lst_eval(model, xi, s - xi), mode) / (s - xi)

    pv = pv_axis(density, spec, asymptotic_coeff=0.0, refine_near=_pole_refinement(s))
    j_b = pv.value / _TWO_PI_I
    front = (1.0 - z * complex(lst_eval(model, s, 0.0))) * cmath.exp(-j_b)
    return TransformValue(1.0 - front, abs(front) * pv.abs_err / _TWO_PI, "contour")


def idle_period_transform(wf: WalkFunctionals, z: complex, s: complex,
                          spec: ContourSpec) -> TransformValue:
    """Joint transform E[z^N e^{-sI}] of the descent count and the overshoot."""
    z, s = complex(z), complex(s)
    _check_interior(z, s)
    if z == 0:
        return TransformValue(0j, 0.0, "contour")
    phi = _phi1(wf, z)

    def density(xi):
        xi = np.asarray(xi, dtype=complex)
        return phi(xi) / (s + xi)

    pv = pv_axis(density, spec, asymptotic_coeff=0.0,
                 refine_near=(-s.imag, max(abs(s.real), 1e-3)))
    expo = cmath.exp(pv.value / _TWO_PI_I)
    return TransformValue(1.0 - expo, abs(expo) * pv.abs_err / _TWO_PI, "contour")


def _steps_exponent(wf: WalkFunctionals, z: complex,
                    spec: ContourSpec) -> tuple[complex, float]:
    pv = pv_axis_singular(_phi1(wf, z), 0.0, spec, phi_at_infinity=0.0)
    return pv.value / _TWO_PI_I, pv.abs_err / _TWO_PI


def steps_pgf(wf: WalkFunctionals, z: complex, spec: ContourSpec) -> TransformValue:
    """PGF E[z^N] of the number of steps to the first strict descent below 0."""
    z = complex(z)
    _check_interior(z, None)
    if z == 0:
        return TransformValue(0j, 0.0, "contour")
    j_n, j_err = _steps_exponent(wf, z, spec)
    tail = (1.0 - z) * cmath.exp(j_n)
    return TransformValue(1.0 - tail, abs(tail) * j_err, "contour")


def transient_max_transform(wf: WalkFunctionals, z: complex, s: complex,
                            spec: ContourSpec) -> TransformValue:
    """Generating function sum_n z^n E[e^{-s M_n}] of the running maximum."""
    z, s = complex(z), complex(s)
    _check_interior(z, s)
    if z == 0:
        return TransformValue(1.0 + 0j, 0.0, "contour")
    phi = _phi1(wf, z)

    def density(xi):
        xi = np.asarray(xi, dtype=complex)
        return phi(xi) / (xi - s)

    pv = pv_axis(density, spec, asymptotic_coeff=0.0, refine_near=_pole_refinement(s))
    w_val = pv.value / _TWO_PI_I
    j_n, j_err = _steps_exponent(wf, z, spec)
    value = cmath.exp(w_val - j_n) / (1.0 - z)
    err = abs(value) * (pv.abs_err / _TWO_PI + j_err)
    return TransformValue(value, err, "contour")


def wienerhopf_factors(wf: WalkFunctionals, z: complex, s: complex,
                       spec: ContourSpec) -> tuple[complex, complex, float]:
    """Boundary Wiener-Hopf pair at Re s = 0 and the factorization residual.

    psi_plus extends the running-maximum factor from the right half-plane,
    psi_minus the overshoot factor from the left; each factor tends to 1 at
    infinity in its half-plane.  The two exponents come from deliberately
    different discretizations, so the residual |psi_minus psi_plus -
    (1 - z h(s,-s))| is an honest independent consistency check, not zero by
    construction.
    """
    z, s = complex(z), complex(s)
    if abs(z) >= 1.0:
        raise DomainError("|z| must be strictly below 1")
    if abs(s.real) > 1e-9 * (1.0 + abs(s)):
        raise DomainError("Wiener-Hopf factors live on Re s = 0")
    s = 1j * s.imag
    kernel_val = 1.0 - z * complex(lst_eval(wf.model, s, -s))
    if z == 0:
        return 1.0 + 0j, 1.0 + 0j, 0.0
    phi = _phi1(wf, z)
    alt = ContourSpec(T=spec.T * 1.5, nodes=spec.nodes + max(1, spec.nodes // 3),
                      richardson_levels=spec.richardson_levels, tol=spec.tol)
    q_main = pv_axis_singular(phi, s, spec, phi_at_infinity=0.0).value / _TWO_PI_I
    q_alt = pv_axis_singular(phi, s, alt, phi_at_infinity=0.0).value / _TWO_PI_I
    psi_plus = cmath.exp(-q_main)
    psi_minus = kernel_val * cmath.exp(q_alt)
    residual = abs(psi_minus * psi_plus - kernel_val)
    return psi_plus, psi_minus, residual


# --- rational engine -------------------------------------------------------

def _kernel_of(wf: WalkFunctionals) -> RationalKernel:
    if wf.model.rational is None:
        raise UnsupportedModel("model does not carry a rational kernel")
    return wf.model.rational


def _drift_flag(wf: WalkFunctionals, z: complex, s: complex) -> bool | None:
    # Only the corner |z| = 1, Re s = 0 leans on the drift condition.
    if abs(abs(z) - 1.0) <= 1e-12 and s.real <= 1e-12:
        if wf.stability != STABLE:
            raise StabilityError("z = 1 at Re s = 0 requires E B < E A")
        return True
    return None


def _root_product(roots: Sequence[complex], shift: complex) -> complex:
    out = 1.0 + 0j
    for r in roots:
        out *= shift - r
    return out


def _rational_value(value: complex) -> TransformValue:
    return TransformValue(value, 1e-12 * (1.0 + abs(value)), "rational")


def busy_period_rational(wf: WalkFunctionals, z: complex, s: complex) -> TransformValue:
    """E[z^N e^{-sP}] as a ratio of left-root products of the shifted kernel."""
    z, s = complex(z), complex(s)
    kernel = _kernel_of(wf)
    drift = _drift_flag(wf, z, s)
    base = find_kernel_roots(kernel, 0.0, s)
    shifted = find_kernel_roots(kernel, z, s, stable_drift=drift)
    ratio = _root_product(base.roots, s) / _root_product(shifted.roots, s)
    front = 1.0 - z * complex(lst_eval(wf.model, s, 0.0))
    return _rational_value(1.0 - front * ratio)


def max_transform_rational(wf: WalkFunctionals, z: complex, s: complex) -> TransformValue:
    """(1-z) sum_n z^n E[e^{-s M_n}]; at z = 1 the stationary maximum E[e^{-sM}]."""
    z, s = complex(z), complex(s)
    if s.real <= 0.0:
        raise DomainError("Re s must be strictly positive")
    kernel = _kernel_of(wf)
    drift = _drift_flag(wf, z, 0.0)
    base = find_kernel_roots(kernel, 0.0, 0.0)
    shifted = find_kernel_roots(kernel, z, 0.0, stable_drift=drift)
    value = (_root_product(shifted.roots, 0.0) / _root_product(base.roots, 0.0)) \
        * (_root_product(base.roots, s) / _root_product(shifted.roots, s))
    return _rational_value(value)


def steps_pgf_rational(wf: WalkFunctionals, z: complex) -> TransformValue:
    """E[z^N] as a ratio of left-root products at s = 0."""
    z = complex(z)
    if abs(z) >= 1.0:
        raise DomainError("|z| must be strictly below 1")
    kernel = _kernel_of(wf)
    base = find_kernel_roots(kernel, 0.0, 0.0)
    shifted = find_kernel_roots(kernel, z, 0.0)
    ratio = _root_product(base.roots, 0.0) / _root_product(shifted.roots, 0.0)
    return _rational_value(1.0 - (1.0 - z) * ratio)


# --- limits and inversion --------------------------------------------------

def geometric_limit(evaluate: Callable[[float], TransformValue], *,
                    h0: float = 0.5, levels: int = 7) -> TransformValue:
    """Extrapolate evaluate(h) to h -> 0 along the ladder h = h0 * 2^{-k}.

    Used for the z -> 1 and s -> 0 limits of the contour engine, which must
    not be evaluated at the boundary directly.  The reported abs_err adds the
    worst inner error to the extrapolation spread.
    """
    hs = np.array([h0 * 2.0 ** (-k) for k in range(levels)])
    seen = [evaluate(float(h)) for h in hs]
    value, err = _extrapolate(hs, np.array([tv.value for tv in seen], dtype=complex))
    return TransformValue(value, err + max(tv.abs_err for tv in seen), seen[-1].method)


def invert_to_distribution(transform: Callable[[complex], complex],
                           t_grid: Sequence[float], *,
                           decay: float = 18.4, terms: int = 40,
                           euler_depth: int = 12) -> list[float]:
    """Invert a Laplace transform on a positive t grid.

    Damped alternating series on the Bromwich line with Euler (binomial)
    acceleration; `decay` bounds the aliasing error by roughly e^{-decay}.
    The error heuristic is the gap between the last two acceleration depths;
    a gap beyond 10^-2 of scale raises NoConvergence.
    """
    if euler_depth < 2 or terms < 1:
        raise ValueError("need terms >= 1 and euler_depth >= 2")
    weights = np.array([math.comb(euler_depth, k) for k in range(euler_depth + 1)],
                       dtype=float)
    prev_w = np.array([math.comb(euler_depth - 1, k) for k in range(euler_depth)],
                      dtype=float)
    out: list[float] = []
    for t_raw in t_grid:
        t = float(t_raw)
        if t <= 0.0:
            raise ValueError("inversion grid points must be positive")
        ks = np.arange(terms + euler_depth + 1)
        fv = np.array([complex(transform(complex((decay + _TWO_PI * k * 1j) / (2 * t))))
                       for k in ks])
        series = np.real(fv) * (-1.0) ** ks
        series[0] *= 0.5
        partial = np.cumsum(series)
        window = partial[terms - 1: terms + euler_depth]
        accel = float(weights @ window) / 2.0 ** euler_depth
        accel_prev = float(prev_w @ window[:-1]) / 2.0 ** (euler_depth - 1)
        scale = math.exp(decay / 2.0) / t
        value = scale * accel
        gap = scale * abs(accel - accel_prev)
        if not math.isfinite(value) or gap > 1e-2 * (1.0 + abs(value)):
            raise NoConvergence("Euler acceleration did not settle",
                                best=value, abs_err=gap)
        out.append(value)
    return out
