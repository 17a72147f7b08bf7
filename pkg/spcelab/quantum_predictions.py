"""
Closed-form and quadrature predictions for the spin singlet.

Every simulator in the package is checked against these oracles. The spin
convention E(AB) = -cos(θA - θB) is used throughout; photon-like simulators
convert with ``hv_models.spin_to_analyzer``.
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Tuple

import numpy as np
from scipy.special import roots_legendre

from .utils import reduce_angle, InvalidSmearing

QUADRATURE_NODES = 64
PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AnalyzerSetting:
    """A measurement direction at one station, in radians reduced to [0, 2π)."""
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", reduce_angle(float(self.angle)))

    @classmethod
    def from_degrees(cls, degrees: float) -> "AnalyzerSetting":
        return cls(math.radians(degrees))

    @property
    def degrees(self) -> float:
        return math.degrees(self.angle)


def _angle(setting) -> float:
    return setting.angle if isinstance(setting, AnalyzerSetting) else float(setting)


@dataclass(frozen=True)
class JointOutcomeDistribution:
    """P(A = a, B = b) for a, b in {+1, -1}."""
    pp: float
    pm: float
    mp: float
    mm: float

    def __post_init__(self):
        entries = (self.pp, self.pm, self.mp, self.mm)
        if any(p < -PROBABILITY_TOLERANCE for p in entries):
            raise ValueError(f"Negative probability in {entries}")
        if abs(sum(entries) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"Probabilities sum to {sum(entries)}, not 1")

    def __getitem__(self, outcomes: Tuple[int, int]) -> float:
        a, b = outcomes
        table = {(1, 1): self.pp, (1, -1): self.pm, (-1, 1): self.mp, (-1, -1): self.mm}
        try:
            return table[(int(a), int(b))]
        except KeyError:
            raise KeyError(f"Outcomes must be +1 or -1, got {outcomes}")

    def marginals(self) -> Tuple[float, float]:
        """P(A = +1), P(B = +1)."""
        return self.pp + self.pm, self.pp + self.mp

    def expectation(self) -> float:
        return self.pp + self.mm - self.pm - self.mp


@lru_cache(maxsize=8)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    return nodes, weights


@dataclass(frozen=True)
class AngularSmearing:
    """
    Analyzer direction spread over [center - half_width, center + half_width].

    :param density: ``"uniform"`` or ``"gaussian"`` (a Gaussian truncated to the interval).
    :param sigma: Standard deviation of the Gaussian density, ignored for uniform.
    """
    center: float
    half_width: float = 0.0
    density: str = "uniform"
    sigma: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.center) or not math.isfinite(self.half_width):
            raise InvalidSmearing("Smearing center and half-width must be finite.")
        if self.half_width < 0:
            raise InvalidSmearing(f"Half-width must be non-negative, got {self.half_width}")
        if self.density not in ("uniform", "gaussian"):
            raise InvalidSmearing(f"Unknown density: {self.density}")
        if self.density == "gaussian" and not self.sigma > 0:
            raise InvalidSmearing("A truncated-gaussian smearing needs sigma > 0.")

    def quadrature(self, nodes: int = QUADRATURE_NODES) -> Tuple[np.ndarray, np.ndarray]:
        """Angles and probability weights of a Gauss-Legendre rule for this density."""
        if self.half_width == 0:
            return np.array([self.center]), np.array([1.0])
        x, w = _legendre(nodes)
        angles = self.center + self.half_width * x
        if self.density == "uniform":
            weights = w / 2.0
        else:
            weights = w * np.exp(-0.5 * ((angles - self.center) / self.sigma) ** 2)
        # normalising in quadrature keeps the density integrating to one exactly
        return angles, weights / weights.sum()

    def mean_direction(self) -> Tuple[float, float]:
        """(∫cos θ dρ, ∫sin θ dρ)."""
        angles, weights = self.quadrature()
        return float(weights @ np.cos(angles)), float(weights @ np.sin(angles))


@dataclass(frozen=True)
class SeparableState:
    """Convex mixture of product states, each given by its local expectations."""
    components: Tuple[Tuple[float, float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        components = tuple((float(p), float(ea), float(eb)) for p, ea, eb in self.components)
        object.__setattr__(self, "components", components)
        if not components:
            raise ValueError("A separable state needs at least one component.")
        for p, ea, eb in components:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"Component weight must lie in (0, 1], got {p}")
            if not (-1.0 <= ea <= 1.0 and -1.0 <= eb <= 1.0):
                raise ValueError(f"Local expectations must lie in [-1, 1], got ({ea}, {eb})")
        total = sum(p for p, _, _ in components)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"Component weights sum to {total}, not 1")

    @classmethod
    def from_arrays(cls, weights: Iterable[float], e_a: Iterable[float], e_b: Iterable[float]) -> "SeparableState":
        return cls(tuple(zip(weights, e_a, e_b)))


def singlet_correlation(theta_a, theta_b) -> float:
    """E(AB | ψ) = -cos(θA - θB)."""
    a, b = _angle(theta_a), _angle(theta_b)
    # cos is even, so ordering the difference makes the result exactly symmetric
    delta = a - b if a >= b else b - a
    return -math.cos(delta)


def singlet_joint_probabilities(theta_a, theta_b) -> JointOutcomeDistribution:
    """The law p(a, b) = (1 - ab cos Δ) / 4, uniform marginals and mean -cos Δ."""
    c = -singlet_correlation(theta_a, theta_b)
    same = (1.0 - c) / 4.0
    opposite = (1.0 + c) / 4.0
    return JointOutcomeDistribution(pp=same, pm=opposite, mp=opposite, mm=same)


def smeared_correlation(smear_a: AngularSmearing, smear_b: AngularSmearing) -> float:
    """
    -∫∫ cos(θ1 - θ2) dρA(θ1) dρB(θ2) by Gauss-Legendre quadrature.

    cos(θ1 - θ2) separates into cos·cos + sin·sin, so the double integral is a
    product of two one-dimensional rules.
    """
    for smear in (smear_a, smear_b):
        if not isinstance(smear, AngularSmearing):
            raise InvalidSmearing(f"Expected AngularSmearing, got {type(smear).__name__}")
    ca, sa = smear_a.mean_direction()
    cb, sb = smear_b.mean_direction()
    return -(ca * cb + sa * sb)


def uniform_smearing_closed_form(smear_a: AngularSmearing, smear_b: AngularSmearing) -> float:
    def factor(delta: float) -> float:
        return 1.0 if delta == 0 else math.sin(delta) / delta

    return -factor(smear_a.half_width) * factor(smear_b.half_width) * math.cos(smear_a.center - smear_b.center)


def separable_correlation(state: SeparableState) -> float:
    """Σ p_i E(A | ρ_i) E(B | ρ̃_i)."""
    return float(sum(p * ea * eb for p, ea, eb in state.components))


def separable_chsh(states: Dict[str, SeparableState]) -> float:
    """
    |E(ab) - E(ab')| + |E(a'b) + E(a'b')| with one separable state per setting pair.

    ``states`` is keyed "ab", "ab'", "a'b", "a'b'".
    """
    missing = {"ab", "ab'", "a'b", "a'b'"} - set(states)
    if missing:
        raise KeyError(f"Missing setting pairs: {sorted(missing)}")
    e = {key: separable_correlation(state) for key, state in states.items()}
    return abs(e["ab"] - e["ab'"]) + abs(e["a'b"] + e["a'b'"])


__all__ = ['AnalyzerSetting', 'JointOutcomeDistribution', 'AngularSmearing', 'SeparableState',
           'singlet_correlation', 'singlet_joint_probabilities', 'smeared_correlation',
           'uniform_smearing_closed_form', 'separable_correlation', 'separable_chsh']
