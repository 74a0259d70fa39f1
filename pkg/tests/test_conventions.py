"""Frozen decimal anchors for the package conventions.

Every constant below was computed once from the Exp(2)/Exp(1) closed forms and
is written out in full.  These tests exist so that any silent change of sign,
normalization, or branch convention (which root is "left", who carries the
1 - z factor, which factor gets the kernel) fails loudly against a literal.
"""

import pytest

from walkfluct.contour import ContourSpec
from walkfluct.fluct import (
    busy_period_rational,
    idle_period_transform,
    max_transform_rational,
    steps_pgf_rational,
    transient_max_transform,
    wienerhopf_factors,
)
from walkfluct.roots import find_kernel_roots


def test_left_root_is_negative_half_plane(models):
    # root in xi of h2(xi, s - xi) - z h1(xi, s - xi) with Re xi < 0
    report = find_kernel_roots(models["product_mm1"].rational, 0.5, 0.5)
    assert report.count_argument_principle == 1
    assert abs(report.roots[0] - (-1.6861406616345072)) < 1e-10


def test_busy_period_anchor(mm1):
    # E z^N e^{-s (b-total over the excursion)}
    tv = busy_period_rational(mm1, 0.5, 0.5)
    assert abs(tv.value - 0.31385933836549285) < 1e-10


def test_steps_pgf_anchor(mm1):
    # E z^N, N = number of steps to first strict descent
    tv = steps_pgf_rational(mm1, 0.5)
    assert abs(tv.value - 0.38196601125010515) < 1e-10


def test_idle_transform_anchor(mm1):
    # E z^N e^{-s I} with I = -S_N > 0 the overshoot, so s enters positively
    tv = idle_period_transform(mm1, 0.5, 1.0, ContourSpec())
    assert abs(tv.value - 0.19098300562505255) < max(5.0 * tv.abs_err, 1e-6)


def test_transient_max_scaling(mm1):
    # contour engine returns the plain sum over n of z^n E e^{-s M_n};
    # the rational engine returns the Abel average, (1 - z) times that sum
    ct = transient_max_transform(mm1, 0.5, 1.0, ContourSpec())
    assert abs(ct.value - 1.8541019662496845) < max(5.0 * ct.abs_err, 1e-6)
    rt = max_transform_rational(mm1, 0.5, 1.0)
    assert abs(rt.value - 0.92705098312484227) < 1e-10


def test_stationary_max_anchor(mm1):
    # at z = 1 the Abel average becomes E e^{-s M} itself
    tv = max_transform_rational(mm1, 1.0, 1.0)
    assert abs(tv.value - 0.75) < 1e-10


def test_busy_period_at_unit_z(mm1):
    # E e^{-s P} over the full excursion; 2 - sqrt(2) at s = 1
    tv = busy_period_rational(mm1, 1.0, 1.0)
    assert abs(tv.value - 0.58578643762690495) < 1e-10


def test_wienerhopf_origin_anchors(mm1):
    # psi_minus carries the kernel and equals 1 - E z^N at the origin;
    # psi_plus is the reciprocal descent factor, product = 1 - z
    pp, pm, _ = wienerhopf_factors(mm1, 0.5, 0.0, ContourSpec())
    assert abs(pm - 0.61803398874989485) < 1e-4
    assert abs(pp - 0.80901699437494745) < 1e-4
