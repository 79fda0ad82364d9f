"""Closed-form asymptotic quantities for the rank-m posterior.

For an alpha-smooth truth, a gamma-smooth prior and dimension d these give
the inducing-count threshold beyond which the sparse posterior matches the
full one pointwise, the limiting coverage of credible sets in the
undersmoothing regime, the pointwise contraction exponent, and the growth
regime of the KL divergence between sparse and full posteriors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from . import normal
from .errors import ArgumentError


class Regime(Enum):
    UNDERSMOOTHING = "Undersmoothing"
    CORRECT_SMOOTHING = "CorrectSmoothing"
    OVERSMOOTHING = "Oversmoothing"


class KLRegime(Enum):
    BELOW_ESTIMATION_THRESHOLD = "BelowEstimationThreshold"
    DIVERGENT_KL_BAND = "DivergentKLBand"
    VANISHING_KL_BAND = "VanishingKLBand"


@dataclass(frozen=True)
class RegimeReport:
    """Smoothness regime and, when available, the limiting coverage."""

    alpha: float
    gamma: float
    regime: Regime
    predicted_coverage: Optional[float]


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise ArgumentError(f"{name} must be positive, got {value}")


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def threshold_base(n: int, alpha: float, gamma: float, d: int = 1) -> float:
    """The unrounded inducing-count threshold sequence.

    d = 1: n^((1/(1+2g)) * ((2+a)/(1+a))); d > 1: n^(d/(d+2g)).
    """
    _check_positive(alpha=alpha, gamma=gamma)
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if d < 1:
        raise ArgumentError(f"d must be >= 1, got {d}")
    if d == 1:
        expo = (1.0 / (1.0 + 2.0 * gamma)) * ((2.0 + alpha) / (1.0 + alpha))
    else:
        expo = d / (d + 2.0 * gamma)
    return float(n) ** expo


def inducing_threshold(n: int, alpha: float, gamma: float, d: int = 1) -> int:
    """Threshold rounded to the nearest integer (half away from zero)."""
    return _round_half_away(threshold_base(n, alpha, gamma, d))


def inducing_count(n: int, alpha: float, gamma: float, d: int = 1,
                   log_adjust: Optional[str] = None) -> int:
    """Inducing count from the threshold, optionally a log factor off it.

    ``log_adjust`` of "below"/"above" divides/multiplies the unrounded
    threshold by log n before rounding; the result is clamped to [1, n].
    """
    base = threshold_base(n, alpha, gamma, d)
    if log_adjust is None:
        m = _round_half_away(base)
    elif log_adjust == "below":
        m = _round_half_away(base / math.log(n)) if n > 1 else 1
    elif log_adjust == "above":
        m = _round_half_away(base * math.log(n)) if n > 1 else 1
    else:
        raise ArgumentError(f"log_adjust must be None, 'below' or 'above', got {log_adjust!r}")
    return max(1, min(n, m))


def predicted_asymptotic_coverage(alpha: float, gamma: float, delta: float) -> RegimeReport:
    """Limiting frequentist coverage of the 1-delta pointwise credible set.

    In the undersmoothing regime (alpha > gamma) the limit is
    P(|N(0, 1/2)| <= z_{1-delta}) = 2 Phi(sqrt(2) z_{1-delta}) - 1, strictly
    between 1 - delta and 1.  The other regimes carry no single limit (the
    limiting coverage depends on the truth), so only the label is reported.
    """
    _check_positive(alpha=alpha, gamma=gamma)
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    if alpha > gamma:
        z = normal.two_sided_quantile(delta)
        coverage = 2.0 * normal.cdf(math.sqrt(2.0) * z) - 1.0
        return RegimeReport(alpha=alpha, gamma=gamma, regime=Regime.UNDERSMOOTHING,
                            predicted_coverage=coverage)
    regime = Regime.CORRECT_SMOOTHING if alpha == gamma else Regime.OVERSMOOTHING
    return RegimeReport(alpha=alpha, gamma=gamma, regime=regime, predicted_coverage=None)


def contraction_exponent(alpha: float, gamma: float) -> float:
    """Exponent r in the pointwise contraction rate n^(-r): min(a,g)/(1+2g)."""
    _check_positive(alpha=alpha, gamma=gamma)
    return min(alpha, gamma) / (1.0 + 2.0 * gamma)


def kl_regime(n: int, m: int, gamma: float) -> KLRegime:
    """Growth regime of KL(rank-m posterior || full posterior) at (n, m).

    Band edges are n^(1/(1+2g)) and n^(2/(1+2g)).  The boundary assignment
    (lower edge inclusive) is a labeled convention: the underlying
    statements are asymptotic and have no sharp finite-n boundary.
    """
    _check_positive(gamma=gamma)
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if not 1 <= m <= n:
        raise ArgumentError(f"m must lie in [1, {n}], got {m}")
    lower = float(n) ** (1.0 / (1.0 + 2.0 * gamma))
    upper = float(n) ** (2.0 / (1.0 + 2.0 * gamma))
    if m < lower:
        return KLRegime.BELOW_ESTIMATION_THRESHOLD
    if m < upper:
        return KLRegime.DIVERGENT_KL_BAND
    return KLRegime.VANISHING_KL_BAND
