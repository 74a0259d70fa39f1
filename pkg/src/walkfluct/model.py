"""Joint increment models (B, A): exact transforms, samplers, rational kernels.

A model packages the joint Laplace-Stieltjes transform h(s1, s2) of one
nonnegative increment pair, an exact sampler for Monte Carlo cross-checks,
the marginal means used by stability checks, and, when h is rational in s1,
the kernel form h = h1/h2 that the root-product engine consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, EvalError, InvalidSpec, PoleError, UnsupportedModel

__all__ = [
    "DistributionSpec",
    "Exponential",
    "Erlang",
    "Hyperexponential",
    "Deterministic",
    "Uniform",
    "RationalKernel",
    "IncrementModel",
    "lst_eval",
    "increment_char",
    "sample_increment",
    "build_product_model",
    "build_threshold_model",
    "build_markov_modulated",
    "build_rational_custom",
    "builtin_models",
]

_KINDS = frozenset({"product", "threshold", "markov_modulated", "rational_custom"})


def _em(w):
    """(1 - exp(-w)) / w, complex-safe and stable near w = 0."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    small = np.abs(w) < 1e-2
    ws = w[small]
    acc = np.zeros_like(ws)
    for k in range(7, -1, -1):
        acc = acc * (-ws) + 1.0 / math.factorial(k + 1)
    out[small] = acc
    wb = w[~small]
    out[~small] = (1.0 - np.exp(-wb)) / wb
    return out


def _lower_reg_gamma(k: int, x):
    """Regularized lower incomplete gamma P(k, x) for integer k, complex x."""
    x = np.asarray(x, dtype=complex)
    out = np.empty_like(x)
    small = np.abs(x) < 0.5
    xs = x[small]
    # P(k,x) = e^{-x} sum_{j>=k} x^j/j!; twenty terms cover |x| < 0.5 to
    # machine precision
    term = xs ** k / math.factorial(k)
    acc = term.copy()
    for j in range(k + 1, k + 21):
        term = term * xs / j
        acc += term
    out[small] = np.exp(-xs) * acc
    xb = x[~small]
    partial = np.zeros_like(xb)
    for j in range(k):
        partial += xb ** j / math.factorial(j)
    out[~small] = 1.0 - np.exp(-xb) * partial
    return out


class DistributionSpec:
    """Base for the built-in nonnegative increment families.

    Subclasses provide the transform on Re s > abscissa, the mean, an exact
    sampler, the cdf, the transforms restricted to {X <= l} and {X > l}, and
    the (num, den) polynomial pair when the transform is rational.
    """

    abscissa: float = -math.inf

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def lst(self, s):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def lower_lst(self, s, l: float):
        """E[e^{-sX}; X <= l]; entire in s (finite-interval integral)."""
        raise NotImplementedError

    def upper_lst(self, s, l: float):
        """E[e^{-sX}; X > l]; same abscissa as the full transform."""
        raise NotImplementedError

    def rational(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(num, den) with den monic, descending powers; None if not rational."""
        return None

    def atom_values(self) -> tuple[float, ...]:
        """Support points carrying positive probability."""
        return ()


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    rate: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise InvalidSpec("exponential rate must be positive and finite")
        object.__setattr__(self, "abscissa", -self.rate)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def lst(self, s):
        return self.rate / (self.rate + np.asarray(s, dtype=complex))

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def cdf(self, x):
        return -math.expm1(-self.rate * x) if x > 0 else 0.0

    def lower_lst(self, s, l):
        w = (self.rate + np.asarray(s, dtype=complex)) * l
        return self.rate * l * _em(w)

    def upper_lst(self, s, l):
        s = np.asarray(s, dtype=complex)
        w = self.rate + s
        return self.rate / w * np.exp(-w * l)

    def rational(self):
        return np.array([self.rate]), np.array([1.0, self.rate])


@dataclass(frozen=True)
class Erlang(DistributionSpec):
    shape: int
    rate: float

    def __post_init__(self) -> None:
        if int(self.shape) != self.shape or self.shape < 1:
            raise InvalidSpec("erlang shape must be a positive integer")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise InvalidSpec("erlang rate must be positive and finite")
        object.__setattr__(self, "abscissa", -self.rate)

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def lst(self, s):
        return (self.rate / (self.rate + np.asarray(s, dtype=complex))) ** self.shape

    def sample(self, rng, size):
        return rng.gamma(float(self.shape), 1.0 / self.rate, size)

    def cdf(self, x):
        if x <= 0:
            return 0.0
        return float(_lower_reg_gamma(self.shape, complex(self.rate * x)).real)

    def lower_lst(self, s, l):
        s = np.asarray(s, dtype=complex)
        return self.lst(s) * _lower_reg_gamma(self.shape, (self.rate + s) * l)

    def upper_lst(self, s, l):
        s = np.asarray(s, dtype=complex)
        return self.lst(s) * (1.0 - _lower_reg_gamma(self.shape, (self.rate + s) * l))

    def rational(self):
        return (np.array([self.rate ** self.shape]),
                np.poly([-self.rate] * self.shape))


@dataclass(frozen=True)
class Hyperexponential(DistributionSpec):
    probs: tuple
    rates: tuple

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        rates = tuple(float(r) for r in self.rates)
        if len(probs) != len(rates) or not probs:
            raise InvalidSpec("hyperexponential needs matching probs and rates")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidSpec("hyperexponential probs must be nonnegative and sum to 1")
        if any(not (math.isfinite(r) and r > 0) for r in rates):
            raise InvalidSpec("hyperexponential rates must be positive and finite")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "abscissa", -min(rates))

    @property
    def mean(self) -> float:
        return sum(p / r for p, r in zip(self.probs, self.rates))

    def lst(self, s):
        s = np.asarray(s, dtype=complex)
        return sum(p * r / (r + s) for p, r in zip(self.probs, self.rates))

    def sample(self, rng, size):
        idx = rng.choice(len(self.probs), size=size, p=self.probs)
        scales = np.asarray([1.0 / r for r in self.rates])
        return rng.exponential(scales[idx])

    def cdf(self, x):
        if x <= 0:
            return 0.0
        return sum(-p * math.expm1(-r * x) for p, r in zip(self.probs, self.rates))

    def lower_lst(self, s, l):
        return sum(p * Exponential(r).lower_lst(s, l)
                   for p, r in zip(self.probs, self.rates))

    def upper_lst(self, s, l):
        return sum(p * Exponential(r).upper_lst(s, l)
                   for p, r in zip(self.probs, self.rates))

    def rational(self):
        den = np.poly([-r for r in self.rates])
        num = np.zeros(len(self.rates), dtype=float)
        for i, (p, r) in enumerate(zip(self.probs, self.rates)):
            others = [-rr for j, rr in enumerate(self.rates) if j != i]
            num = np.polyadd(num, p * r * np.poly(others) if others else [p * r])
        return num, den


@dataclass(frozen=True)
class Deterministic(DistributionSpec):
    value: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value >= 0):
            raise InvalidSpec("deterministic value must be nonnegative and finite")

    @property
    def mean(self) -> float:
        return self.value

    def lst(self, s):
        return np.exp(-np.asarray(s, dtype=complex) * self.value)

    def sample(self, rng, size):
        return np.full(size, self.value)

    def cdf(self, x):
        return 1.0 if x >= self.value else 0.0

    def lower_lst(self, s, l):
        shape = np.asarray(s, dtype=complex)
        return self.lst(s) if self.value <= l else np.zeros_like(shape)

    def upper_lst(self, s, l):
        shape = np.asarray(s, dtype=complex)
        return self.lst(s) if self.value > l else np.zeros_like(shape)

    def atom_values(self):
        return (self.value,)


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise InvalidSpec("uniform support needs 0 <= lo < hi < inf")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def lst(self, s):
        s = np.asarray(s, dtype=complex)
        return np.exp(-s * self.lo) * _em(s * (self.hi - self.lo))

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def cdf(self, x):
        return min(1.0, max(0.0, (x - self.lo) / (self.hi - self.lo)))

    def lower_lst(self, s, l):
        s = np.asarray(s, dtype=complex)
        c = min(max(l, self.lo), self.hi)
        frac = (c - self.lo) / (self.hi - self.lo)
        return frac * np.exp(-s * self.lo) * _em(s * (c - self.lo))

    def upper_lst(self, s, l):
        return self.lst(s) - self.lower_lst(s, l)


# ---------------------------------------------------------------------------
# polynomial helpers (descending coefficient arrays throughout)

def _poly_pow(p: np.ndarray, k: int) -> np.ndarray:
    out = np.array([1.0 + 0j])
    for _ in range(k):
        out = np.polymul(out, p)
    return out


def _poly_sub_s_minus_xi(p: np.ndarray, s: complex) -> np.ndarray:
    """Coefficients in xi of p(s - xi), by Horner in the base (s - xi)."""
    base = np.array([-1.0, s], dtype=complex)
    acc = np.array([complex(p[0])])
    for c in p[1:]:
        acc = np.polymul(acc, base)
        acc[-1] += c
    return acc


def _pad_to(p: np.ndarray, length: int) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    return np.concatenate([np.zeros(length - len(p), dtype=complex), p])


@dataclass(frozen=True)
class RationalKernel:
    """h = h1/h2 with both polynomials in s1 and coefficients functions of s2.

    Coefficient sequences run by descending power of s1; h2_coeffs[0] must be
    identically 1 and degree = deg h2 > deg h1.  clear_fn, when present, maps
    (z, s) to the descending coefficients in xi of a polynomial proportional
    to h2(xi, s-xi) - z*h1(xi, s-xi); the clearing factor vanishes only at
    points with Re xi > 0 whenever Re s >= 0, so it leaves left-half-plane
    zeros intact.
    """

    h1_coeffs: tuple
    h2_coeffs: tuple
    degree: int
    reducible_in_xi: bool
    clear_fn: Callable | None = None

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise InvalidSpec("kernel degree must be at least 1")
        if len(self.h2_coeffs) != self.degree + 1:
            raise InvalidSpec("h2 needs degree + 1 coefficient functions")
        if len(self.h1_coeffs) > self.degree:
            raise InvalidSpec("deg h1 must be strictly below deg h2")
        if self.reducible_in_xi and self.clear_fn is None:
            raise InvalidSpec("reducible kernels must supply clear_fn")
        for probe in (0.0, 1.7, 2.3 + 0.9j):
            lead = complex(np.asarray(self.h2_coeffs[0](probe)).reshape(()))
            if abs(lead - 1.0) > 1e-9:
                raise InvalidSpec("leading h2 coefficient must be identically 1")

    def _horner(self, coeffs, s1, s2):
        s1 = np.asarray(s1, dtype=complex)
        acc = np.zeros(np.broadcast(s1, np.asarray(s2)).shape, dtype=complex)
        for c in coeffs:
            acc = acc * s1 + c(s2)
        return acc

    def eval_h1(self, s1, s2):
        if not self.h1_coeffs:
            return np.zeros(np.broadcast(np.asarray(s1), np.asarray(s2)).shape, dtype=complex)
        return self._horner(self.h1_coeffs, s1, s2)

    def eval_h2(self, s1, s2):
        return self._horner(self.h2_coeffs, s1, s2)

    def eval_ratio(self, s1, s2):
        return self.eval_h1(s1, s2) / self.eval_h2(s1, s2)

    def eval_shifted(self, xi, z, s):
        """h2(xi, s - xi) - z*h1(xi, s - xi), the root-product kernel."""
        xi = np.asarray(xi, dtype=complex)
        s2 = s - xi
        return self.eval_h2(xi, s2) - z * self.eval_h1(xi, s2)

    def clear(self, z: complex, s: complex) -> np.ndarray:
        if self.clear_fn is None:
            raise UnsupportedModel("kernel does not clear to a polynomial in xi")
        return np.asarray(self.clear_fn(complex(z), complex(s)), dtype=complex)


@dataclass(frozen=True)
class IncrementModel:
    """Immutable joint law of one increment pair.

    lst is vectorized over broadcastable complex arrays; sampler(rng, size)
    returns a pair of nonnegative float arrays, or is None for transform-only
    kernels.  b_abscissa/a_abscissa bound the analytic continuation of the
    marginal formulas below Re s = 0 (0.0 means no continuation is claimed).
    """

    kind: str
    lst: Callable
    sampler: Callable | None
    mean_b: float
    mean_a: float
    rational: RationalKernel | None = None
    label: str = ""
    b_abscissa: float = 0.0
    a_abscissa: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise InvalidSpec(f"unknown model kind {self.kind!r}")
        if not (self.mean_b >= 0 and self.mean_a >= 0):
            raise InvalidSpec("means must be nonnegative")
        norm = complex(np.asarray(self.lst(0.0, 0.0)).reshape(()))
        if abs(norm - 1.0) > 1e-9:
            raise InvalidSpec(f"h(0,0) = {norm:.12g}, expected 1")


def lst_eval(model: IncrementModel, s1, s2):
    """h(s1, s2), with domain checks and pole detection.

    Points with Re s < 0 are allowed only where the model declares an
    analytic continuation: through the rational kernel in s1, and down to the
    marginal abscissa in s2.  Vectorized over broadcastable arrays; scalar
    input returns a plain complex.
    """
    if np.ndim(s1) == 0 and np.ndim(s2) == 0:
        s1, s2 = complex(s1), complex(s2)
        if s2.real < 0 and s2.real <= model.a_abscissa:
            raise DomainError(f"Re s2 = {s2.real:g} is below the continuation abscissa")
        if s1.real < 0 and model.rational is None and s1.real <= model.b_abscissa:
            raise DomainError(f"Re s1 = {s1.real:g} outside the analyticity region")
        with np.errstate(all="ignore"):
            val = complex(np.asarray(model.lst(s1, s2)).reshape(()))
        if not (math.isfinite(val.real) and math.isfinite(val.imag)):
            if model.rational is not None:
                raise PoleError(f"s1 = {s1:.6g} hits a pole of the kernel")
            raise EvalError(f"transform not finite at ({s1:.6g}, {s2:.6g})")
        return val
    a1 = np.asarray(s1, dtype=complex)
    a2 = np.asarray(s2, dtype=complex)
    re1, re2 = np.broadcast_arrays(a1.real, a2.real)
    if bool(np.any((re2 < 0) & (re2 <= model.a_abscissa))):
        raise DomainError("Re s2 below the continuation abscissa on the evaluation set")
    if model.rational is None and \
            bool(np.any((re1 < 0) & (re1 <= model.b_abscissa))):
        raise DomainError("Re s1 outside the analyticity region on the evaluation set")
    with np.errstate(all="ignore"):
        val = np.asarray(model.lst(a1, a2), dtype=complex)
    if not bool(np.all(np.isfinite(val))):
        if model.rational is not None:
            raise PoleError("a pole of the kernel lies on the evaluation set")
        raise EvalError("transform not finite on the evaluation set")
    return val


def increment_char(model: IncrementModel, xi):
    """h(xi, -xi), the two-sided transform of the step A - B along the axis.

    Vectorized over xi; scalar input returns a plain complex.
    """
    arr = np.asarray(xi, dtype=complex)
    if arr.ndim == 0:
        return lst_eval(model, complex(arr), -complex(arr))
    return lst_eval(model, arr, -arr)


def sample_increment(model: IncrementModel, rng: np.random.Generator) -> tuple[float, float]:
    if model.sampler is None:
        raise UnsupportedModel("model has no sampler")
    b, a = model.sampler(rng, 1)
    return float(b[0]), float(a[0])


def _reject_shared_atoms(b_law: DistributionSpec, a_law: DistributionSpec) -> None:
    shared = set(b_law.atom_values()) & set(a_law.atom_values())
    if shared:
        raise InvalidSpec(
            f"P(B = A) > 0 (shared atom at {sorted(shared)[0]:g}); "
            "the transform identities assume a walk with no atom at zero")


def build_product_model(b_law: DistributionSpec, a_law: DistributionSpec,
                        label: str = "") -> IncrementModel:
    """Independent pair: h(s1, s2) = E e^{-s1 B} * E e^{-s2 A}."""
    _reject_shared_atoms(b_law, a_law)

    def lst(s1, s2):
        return b_law.lst(s1) * a_law.lst(s2)

    def sampler(rng, size):
        return b_law.sample(rng, size), a_law.sample(rng, size)

    kernel = None
    b_rat = b_law.rational()
    if b_rat is not None:
        num, den = b_rat
        n = len(den) - 1
        h1 = tuple(
            (lambda s2, c=complex(c): c * a_law.lst(s2))
            for c in _pad_to(num, n)
        )
        h2 = tuple((lambda s2, c=complex(c): c * np.ones_like(np.asarray(s2, dtype=complex)))
                   for c in den)
        a_rat = a_law.rational()
        clear_fn = None
        if a_rat is not None:
            a_num, a_den = a_rat

            def clear_fn(z, s, num=num, den=den, a_num=a_num, a_den=a_den):
                dg = _poly_sub_s_minus_xi(a_den, s)
                ng = _poly_sub_s_minus_xi(a_num, s)
                return np.polysub(np.polymul(den, dg), z * np.polymul(num, ng))

        kernel = RationalKernel(h1_coeffs=h1, h2_coeffs=h2, degree=n,
                                reducible_in_xi=a_rat is not None, clear_fn=clear_fn)
    return IncrementModel(
        kind="product", lst=lst, sampler=sampler,
        mean_b=b_law.mean, mean_a=a_law.mean, rational=kernel,
        label=label or "product", b_abscissa=b_law.abscissa, a_abscissa=a_law.abscissa)


def build_threshold_model(f1: DistributionSpec, f2: DistributionSpec,
                          a_law: DistributionSpec, l: float,
                          label: str = "") -> IncrementModel:
    """B drawn from f1's law while A <= l and from f2's law once A > l.

    h(s1, s2) = f1(s1)*a1(s2) + f2(s1)*a2(s2) with a1/a2 the transforms of A
    restricted to [0, l] and (l, inf).
    """
    if not (math.isfinite(l) and l > 0):
        raise InvalidSpec("threshold l must be positive and finite")
    r1, r2 = f1.rational(), f2.rational()
    if r1 is None or r2 is None:
        raise InvalidSpec("threshold branch transforms must be proper rational LSTs")
    p_low = a_law.cdf(l)

    def lst(s1, s2):
        return f1.lst(s1) * a_law.lower_lst(s2, l) + f2.lst(s1) * a_law.upper_lst(s2, l)

    def sampler(rng, size):
        a = a_law.sample(rng, size)
        b1 = f1.sample(rng, size)
        b2 = f2.sample(rng, size)
        return np.where(a <= l, b1, b2), a

    n1, d1 = r1
    n2, d2 = r2
    h2_poly = np.polymul(d1, d2)
    n = len(h2_poly) - 1
    c1 = _pad_to(np.polymul(n1, d2), n)
    c2 = _pad_to(np.polymul(n2, d1), n)
    h1 = tuple(
        (lambda s2, u=complex(u), v=complex(v):
         u * a_law.lower_lst(s2, l) + v * a_law.upper_lst(s2, l))
        for u, v in zip(c1, c2)
    )
    h2 = tuple((lambda s2, c=complex(c): c * np.ones_like(np.asarray(s2, dtype=complex)))
               for c in h2_poly)
    kernel = RationalKernel(h1_coeffs=h1, h2_coeffs=h2, degree=n,
                            reducible_in_xi=False, clear_fn=None)
    mean_b = f1.mean * p_low + f2.mean * (1.0 - p_low)
    return IncrementModel(
        kind="threshold", lst=lst, sampler=sampler,
        mean_b=mean_b, mean_a=a_law.mean, rational=kernel,
        label=label or "threshold",
        b_abscissa=max(f1.abscissa, f2.abscissa), a_abscissa=a_law.abscissa)


def _faddeev_leverrier(T: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Characteristic polynomial of T (descending, monic) and adjugate slices.

    Returns cs with det(lam*I - T) = sum_k cs[k] lam^(m-k) and matrices M_j
    with adj(lam*I - T) = sum_j M_j lam^(m-1-j).
    """
    m = T.shape[0]
    cs = np.zeros(m + 1)
    cs[0] = 1.0
    Ms = [np.eye(m)]
    M = np.eye(m)
    for k in range(1, m + 1):
        TM = T @ M
        cs[k] = -np.trace(TM) / k
        M = TM + cs[k] * np.eye(m)
        if k < m:
            Ms.append(M)
    return cs, Ms


def build_markov_modulated(alpha, T, t, f1_over_f2: DistributionSpec,
                           g0: DistributionSpec, label: str = "") -> IncrementModel:
    """Chain-modulated sum: kappa visits of a transient chain, each visit
    contributing an independent pair (B_i, A_i) with B per-visit transform
    f1/f2 and A per-visit transform g0.

    h(s1, s2) = alpha^t adj-resolvent t evaluated at x = f(s1) g0(s2), the
    probability generating function of kappa at x.
    """
    alpha = np.asarray(alpha, dtype=float)
    T = np.asarray(T, dtype=float)
    t = np.asarray(t, dtype=float)
    m = alpha.size
    if T.shape != (m, m) or t.shape != (m,):
        raise InvalidSpec("alpha, T, t dimensions disagree")
    if alpha.min() < 0 or abs(alpha.sum() - 1.0) > 1e-12:
        raise InvalidSpec("alpha must be a probability vector")
    if T.min() < 0 or t.min() < 0:
        raise InvalidSpec("T and t must be nonnegative")
    rows = T.sum(axis=1)
    if (rows > 1 + 1e-12).any():
        raise InvalidSpec("row sums of T exceed 1")
    if np.max(np.abs(rows + t - 1.0)) > 1e-9:
        raise InvalidSpec("each row of T plus its exit mass must sum to 1")
    if np.max(np.abs(np.linalg.eigvals(T))) >= 1 - 1e-12:
        raise InvalidSpec("chain does not reach absorption almost surely")
    f_rat = f1_over_f2.rational()
    if f_rat is None:
        raise InvalidSpec("per-visit transform f1/f2 must be a proper rational LST")

    visits = alpha @ np.linalg.inv(np.eye(m) - T) @ np.ones(m)

    def lst(s1, s2):
        r = np.asarray(f1_over_f2.lst(s1) * g0.lst(s2), dtype=complex)
        shape = r.shape
        flat = r.reshape(-1)
        mats = np.eye(m) - flat[:, None, None] * T
        rhs = np.broadcast_to(t[:, None], (flat.size, m, 1))
        try:
            sols = np.linalg.solve(mats, rhs)[..., 0]
        except np.linalg.LinAlgError as exc:
            raise PoleError(f"singular resolvent: {exc}") from exc
        return (flat * (sols @ alpha)).reshape(shape)

    # per-visit increments are iid across states, so (B, A) depends on the
    # chain only through the visit count kappa, a discrete phase-type
    # variable with P(kappa = k) = alpha T^(k-1) t; tabulate its cdf to
    # double precision when the tail decays fast enough
    _pmf = []
    _v = alpha.copy()
    _tail = 1.0
    while len(_pmf) < 65536:
        pk = float(_v @ t)
        _pmf.append(pk)
        _tail -= pk
        if _tail < 1e-16:
            break
        _v = _v @ T
    if _tail < 1e-16:
        kappa_cdf = np.cumsum(_pmf)
        kappa_cdf[-1] = 1.0
    else:
        kappa_cdf = None  # near-critical chain, fall back to path simulation

    def _visit_counts(rng, size):
        if kappa_cdf is not None:
            return np.searchsorted(kappa_cdf, rng.random(size)) + 1
        trans = np.column_stack([T, t]).cumsum(axis=1)
        counts = np.zeros(size, dtype=np.int64)
        idx = np.arange(size)
        state = rng.choice(m, size=size, p=alpha)
        while idx.size:
            counts[idx] += 1
            nxt = (trans[state] < rng.random(idx.size)[:, None]).sum(axis=1)
            keep = nxt < m
            idx = idx[keep]
            state = nxt[keep]
        return counts

    def sampler(rng, size):
        counts = _visit_counts(rng, size)
        total = int(counts.sum())
        if total == 0:
            return np.zeros(size), np.zeros(size)
        starts = np.concatenate([[0], np.cumsum(counts[:-1])])
        b = np.add.reduceat(f1_over_f2.sample(rng, total), starts)
        a = np.add.reduceat(g0.sample(rng, total), starts)
        return b, a

    # kernel: with x = (n_f/d_f)(s1) g0(s2), clearing d_f^m gives
    #   h2 = sum_k cs[k] (n_f g0)^k d_f^(m-k),   h1 = sum_j gam[j] (n_f g0)^(j+1) d_f^(m-1-j)
    cs, Ms = _faddeev_leverrier(T)
    gam = np.array([alpha @ M @ t for M in Ms])
    n_f, d_f = f_rat
    lead = d_f[0]
    n_f = np.asarray(n_f, dtype=float) / lead
    d_f = np.asarray(d_f, dtype=float) / lead
    n = m * (len(d_f) - 1)
    W2 = np.stack([_pad_to(np.polymul(_poly_pow(n_f, k), _poly_pow(d_f, m - k)), n + 1)
                   for k in range(m + 1)])
    W1 = np.stack([_pad_to(np.polymul(_poly_pow(n_f, j + 1), _poly_pow(d_f, m - 1 - j)), n)
                   for j in range(m)])

    def _coeff(col, weights):
        # sum_k weights[k] * col[k] * g0(s2)^k as a function of s2
        c_asc = np.asarray(weights) * col

        def fn(s2, c_asc=c_asc):
            g = np.asarray(g0.lst(s2), dtype=complex)
            return np.polynomial.polynomial.polyval(g, c_asc)
        return fn

    h2 = tuple(_coeff(W2[:, i], cs) for i in range(n + 1))
    h1 = tuple(_coeff(np.concatenate([[0.0], W1[:, i]]), np.concatenate([[0.0], gam]))
               for i in range(n))

    clear_fn = None
    g_rat = g0.rational()
    if g_rat is not None:
        g_num, g_den = g_rat

        def clear_fn(z, s):
            u = np.polymul(n_f, _poly_sub_s_minus_xi(g_num, s))
            v = np.polymul(d_f, _poly_sub_s_minus_xi(g_den, s))
            acc = np.array([0.0 + 0j])
            for k in range(m + 1):
                term = cs[k] * np.polymul(_poly_pow(u, k), _poly_pow(v, m - k))
                acc = np.polyadd(acc, term)
            for j in range(m):
                term = z * gam[j] * np.polymul(_poly_pow(u, j + 1), _poly_pow(v, m - 1 - j))
                acc = np.polysub(acc, term)
            return acc

    kernel = RationalKernel(h1_coeffs=h1, h2_coeffs=h2, degree=n,
                            reducible_in_xi=g_rat is not None, clear_fn=clear_fn)
    return IncrementModel(
        kind="markov_modulated", lst=lst, sampler=sampler,
        mean_b=visits * f1_over_f2.mean, mean_a=visits * g0.mean, rational=kernel,
        label=label or "markov_modulated",
        b_abscissa=f1_over_f2.abscissa, a_abscissa=g0.abscissa)


def build_rational_custom(h1_coeffs, h2_coeffs, degree: int, *,
                          mean_b: float, mean_a: float,
                          sampler: Callable | None = None,
                          reducible_in_xi: bool = False,
                          clear_fn: Callable | None = None,
                          label: str = "") -> IncrementModel:
    """Model defined directly by its rational kernel; sampler optional."""
    kernel = RationalKernel(h1_coeffs=tuple(h1_coeffs), h2_coeffs=tuple(h2_coeffs),
                            degree=degree, reducible_in_xi=reducible_in_xi,
                            clear_fn=clear_fn)

    def lst(s1, s2):
        return kernel.eval_ratio(s1, s2)

    return IncrementModel(
        kind="rational_custom", lst=lst, sampler=sampler,
        mean_b=mean_b, mean_a=mean_a, rational=kernel,
        label=label or "rational_custom")


def builtin_models() -> dict[str, IncrementModel]:
    """The three reference models used across tests and the CLI.

    product_mm1 is the M/M/1 walk (B ~ Exp(2) service, A ~ Exp(1) spacing);
    threshold_exp switches the B rate at A = 1; markov_2state runs a
    two-state transient chain.  All three are stable (E B < E A).
    """
    return {
        "product_mm1": build_product_model(
            Exponential(2.0), Exponential(1.0), label="product_mm1"),
        "threshold_exp": build_threshold_model(
            Exponential(3.0), Exponential(1.2), Exponential(1.0), 1.0,
            label="threshold_exp"),
        "markov_2state": build_markov_modulated(
            [0.6, 0.4], [[0.3, 0.2], [0.1, 0.4]], [0.5, 0.5],
            Exponential(5.0), Exponential(2.0), label="markov_2state"),
    }
