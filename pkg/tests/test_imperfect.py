"""Splitter robustness scans: smeared impurity, confining walls and
background curvature, reported as the end-site imbalance epsilon."""

import numpy as np
import pytest

from chainoptics.calibrate import find_beta5050
from chainoptics.imperfect import (
    ImbalanceReport,
    gaussian_width_scan,
    wall_strength_scan,
    curvature_scan,
)


def test_narrow_gaussian_recovers_point_impurity():
    (report,) = gaussian_width_scan(21, [1e-6])
    assert isinstance(report, ImbalanceReport)
    assert report.parameter_name == "fwhm"
    assert report.parameter == 1e-6
    assert abs(report.epsilon) < 1e-12
    assert not report.recalibrated
    base = find_beta5050(21)
    assert report.beta_used == pytest.approx(base.value, abs=1e-12)
    assert report.t_star == pytest.approx(base.t_star, abs=1e-12)


def test_gaussian_broadening_unbalances_splitter():
    narrow, mid = gaussian_width_scan(21, [0.66, 4.0])
    assert abs(narrow.epsilon) < 0.01
    # a smeared impurity over-transmits at the held working point
    assert mid.epsilon < -0.1
    assert 0.0 < mid.transmission_probability < 0.5


def test_gaussian_recalibration_restores_balance():
    (plain,) = gaussian_width_scan(21, [8.0])
    (recal,) = gaussian_width_scan(21, [8.0], recalibrate=True)
    assert abs(plain.epsilon) > 0.1
    assert abs(recal.epsilon) < 1e-9
    assert recal.recalibrated and not plain.recalibrated
    assert abs(recal.beta_used - plain.beta_used) > 0.01
    assert recal.t_star == plain.t_star


def test_gaussian_per_width_transfer_time():
    (held,) = gaussian_width_scan(21, [8.0])
    (own,) = gaussian_width_scan(21, [8.0], per_width_tstar=True)
    assert own.t_star != held.t_star
    assert own.t_star > held.t_star


def test_gaussian_validation():
    with pytest.raises(ValueError):
        gaussian_width_scan(21, [2.0, 0.0])
    with pytest.raises(ValueError):
        gaussian_width_scan(21, [-1.0])


def test_walls_weaken_into_transparency():
    reports = wall_strength_scan(21, [0.5, 3.0, 1000.0])
    eps = [r.epsilon for r in reports]
    assert eps[0] > eps[1] > eps[2] > 0.0
    assert eps[2] < 1e-3
    # hard walls leave the embedded transfer time at its free value
    assert reports[2].t_star == pytest.approx(23.709, abs=0.05)
    assert all(not r.recalibrated for r in reports)
    assert all(r.parameter_name == "beta_walls" for r in reports)


def test_walls_validation():
    with pytest.raises(ValueError):
        wall_strength_scan(21, [1.0, -2.0])


def test_curvature_grows_quadratically_from_zero():
    reports = curvature_scan(21, [0.01, 0.03])
    assert [r.parameter for r in reports] == [0.0, 0.01, 0.03]
    assert abs(reports[0].epsilon) < 1e-12
    mags = [abs(r.epsilon) for r in reports]
    assert mags[0] < mags[1] < mags[2]
    # superlinear growth in omega
    assert mags[2] / mags[1] > 3.0
    assert all(r.parameter_name == "omega" for r in reports)


def test_curvature_validation():
    with pytest.raises(ValueError):
        curvature_scan(21, [-0.01])


def test_report_field_types():
    (r,) = wall_strength_scan(11, [2.0])
    assert isinstance(r.parameter, float)
    assert isinstance(r.epsilon, float)
    assert isinstance(r.beta_used, float)
    assert isinstance(r.recalibrated, bool)
    assert isinstance(r.t_star, float)
    assert isinstance(r.transmission_probability, float)
