"""Geodesic flow entropy and Lyapunov laboratory."""

import json

from . import _core
from ._core import DomainError, NumericalError, ScenarioError, SurfaceModel, sha256_hex

__all__ = [
    "DomainError",
    "NumericalError",
    "RunResult",
    "ScenarioError",
    "SurfaceModel",
    "exp_bound_radius",
    "lyapunov_spectrum",
    "run_scenario",
    "sasaki_sectional",
    "sha256_hex",
    "validate_scenario",
]


def lyapunov_spectrum(model, x, y, angle, T, renorm_dt=1.0):
    """Spectrum report for the orbit of (x, y, angle), as a dict."""
    return json.loads(_core.lyapunov_spectrum_json(model, x, y, angle, T, renorm_dt))


def sasaki_sectional(model, x, y, angle, a, b):
    """Sasaki sectional curvature of the plane spanned by frame vectors a and b."""
    return _core.sasaki_sectional_frame(model, x, y, angle, list(a), list(b))


def exp_bound_radius(model, x, y, angle, wx, wy, bound=2.5, t_max=4.0):
    """Largest t <= t_max with |d exp| <= bound along the geodesic of (x, y, angle)."""
    return _core.exp_bound_radius(model, x, y, angle, wx, wy, bound, t_max)


def validate_scenario(text):
    """Raises ScenarioError (with .line and .detail) on a malformed scenario."""
    _core.validate_scenario(text)


class RunResult:
    """Exit code, failing stage and artifacts of a scenario run."""

    def __init__(self, raw):
        self.exit = raw["exit"]
        self.stage = raw["stage"]
        self.message = raw["message"]
        self.artifacts = dict(raw["artifacts"])
        self.names = [name for name, _ in raw["artifacts"]]

    def json(self, name):
        return json.loads(self.artifacts[name])

    def text(self, name):
        return self.artifacts[name].decode()


def run_scenario(text, seed=None, threads=1):
    """Runs a scenario given as text. Outputs stay in memory."""
    return RunResult(_core.run_scenario(text, seed, threads))
