import hashlib
import math

import pytest

import anosov_lab as al

SPECTRUM = """
[model]
kind = hyperbolic
c = 1
[experiment]
type = spectrum
seed = 3
[spectrum]
T = 200
"""


def test_model_basics():
    h = al.SurfaceModel("hyperbolic", c=2.0)
    assert h.name == "hyperbolic(c=2)"
    assert h.gaussian_curvature(0.3, 1.7) == pytest.approx(-4.0)
    lo, hi = al.SurfaceModel("perturbed", c=1.0, eps=0.1).curvature_bounds
    assert lo == pytest.approx(-1.21) and hi == pytest.approx(-0.81)
    with pytest.raises(ValueError):
        al.SurfaceModel("sphere")


def test_spectrum_closed_form():
    s = al.lyapunov_spectrum(al.SurfaceModel("hyperbolic", c=1.0), 0.1, 1.0, 0.4, 200.0)
    assert s["exponents"] == pytest.approx([1.0, 0.0, -1.0], abs=1e-3)
    assert s["chi_plus"] == pytest.approx(1.0, abs=1e-3)


def test_sasaki_flat_plane():
    flat = al.SurfaceModel("flat")
    assert al.sasaki_sectional(flat, 0, 0, 0.2, (1, 0, 0), (0, 1, 0)) == pytest.approx(0.0, abs=1e-12)


def test_exp_radius_curvature_minus_one():
    # sinh(t) / t = 5/2 at t = 2.5527 for w orthogonal to v.
    h = al.SurfaceModel("hyperbolic", c=1.0)
    t = al.exp_bound_radius(h, 0.0, 1.0, 0.0, 0.0, 1.0)
    assert t == pytest.approx(2.5527, abs=1e-3)
    assert math.sinh(t) / t == pytest.approx(2.5, abs=1e-2)


def test_scenario_errors_carry_line():
    with pytest.raises(al.ScenarioError) as err:
        al.validate_scenario(SPECTRUM.replace("T = 200", "T = abc"))
    assert err.value.line == 9
    assert "T" in err.value.detail


def test_run_is_deterministic():
    a = al.run_scenario(SPECTRUM)
    b = al.run_scenario(SPECTRUM, threads=2)
    assert a.exit == 0
    assert a.names == ["spectrum.json", "report.json"]
    assert a.artifacts == b.artifacts
    assert a.json("spectrum.json")["model"] == "hyperbolic(c=1)"
    data = a.artifacts["spectrum.json"]
    assert al.sha256_hex(data) == hashlib.sha256(data).hexdigest()


def test_numerical_failure_exit_code():
    r = al.run_scenario(SPECTRUM.replace("c = 1", "c = 2").replace("T = 200", "T = 40000\nrenorm_dt = 400\nwarmup = 0"))
    assert r.exit == 3
    assert r.stage == "spectrum"
    assert r.json("error.json")["kind"] == "numerical"
