"""Power trade-offs between two- and three-arm dose optimization studies.

Total sample size is held fixed, so a two-arm study puts N/2 patients on each
arm against N/3 for three arms. Under a linear dose-response the L-vs-H
contrast carries effect ``delta`` and any adjacent pair carries ``delta/2``.
Powers are expressed relative to the three-arm study's power C, which cancels
from every comparison and is therefore never represented.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ArmChoice(enum.Enum):
    THREE_ARM = "three-arm"
    TWO_ARM_EXTREMES = "two-arm-extremes"   # L + H
    TWO_ARM_ADJACENT = "two-arm-adjacent"   # L + M or M + H


class Direction(enum.Enum):
    EXPECTED_EXCEEDS_ONE = "exceeds"
    EXPECTED_BELOW_ONE = "below"


def relative_strength(delta1: float, n1: float, delta2: float, n2: float) -> float:
    """Sample-size-adjusted signal ratio ``delta1 sqrt(n1) / (delta2 sqrt(n2))``."""
    for name, v in (("delta1", delta1), ("n1", n1), ("delta2", delta2), ("n2", n2)):
        if not (v > 0) or not math.isfinite(v):
            raise ValueError(f"{name} must be positive, got {v!r}")
    return delta1 * math.sqrt(n1) / (delta2 * math.sqrt(n2))


_POWER_RATIOS = {
    ArmChoice.THREE_ARM: 1.0,
    ArmChoice.TWO_ARM_EXTREMES: math.sqrt(3.0 / 2.0),
    ArmChoice.TWO_ARM_ADJACENT: math.sqrt(3.0 / 8.0),
}


def power_ratio(choice: ArmChoice) -> float:
    """Approximate power of ``choice`` relative to the three-arm study."""
    return _POWER_RATIOS[ArmChoice(choice)]


@dataclass(frozen=True)
class LambdaThreshold:
    """Solution of ``lam * a + (1 - lam) * b = 1`` for a prior belief ``lam``.

    ``status`` is ``"threshold"`` when the root lies in [0, 1]; otherwise the
    design is ``"always"`` or ``"never"`` justified and ``value`` holds the
    out-of-range root (``nan`` if a == b).
    """

    value: float
    favorable_ratio: float
    unfavorable_ratio: float
    direction: Direction
    status: str

    def expected_ratio(self, lam: float) -> float:
        return lam * self.favorable_ratio + (1.0 - lam) * self.unfavorable_ratio

    def justified(self, lam: float) -> bool:
        """Strict inequality: a belief exactly at the threshold does not justify."""
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"prior belief must lie in [0, 1], got {lam!r}")
        e = self.expected_ratio(lam)
        if self.direction is Direction.EXPECTED_EXCEEDS_ONE:
            return e > 1.0
        return e < 1.0


def lambda_threshold(favorable_ratio: float, unfavorable_ratio: float,
                     direction: Direction = Direction.EXPECTED_EXCEEDS_ONE) -> LambdaThreshold:
    a, b = float(favorable_ratio), float(unfavorable_ratio)
    direction = Direction(direction)
    if a == b:
        # no root: the expected ratio does not depend on lam
        sat = (b > 1.0) if direction is Direction.EXPECTED_EXCEEDS_ONE else (b < 1.0)
        return LambdaThreshold(math.nan, a, b, direction, "always" if sat else "never")
    lam = (1.0 - b) / (a - b)
    if 0.0 <= lam <= 1.0:
        status = "threshold"
    else:
        t = LambdaThreshold(lam, a, b, direction, "threshold")
        status = "always" if t.justified(0.0) and t.justified(1.0) else "never"
    return LambdaThreshold(lam, a, b, direction, status)


def exclude_middle() -> LambdaThreshold:
    """Belief that M is not optimal needed before dropping it for an L+H study."""
    return lambda_threshold(power_ratio(ArmChoice.TWO_ARM_EXTREMES),
                            power_ratio(ArmChoice.TWO_ARM_ADJACENT),
                            Direction.EXPECTED_EXCEEDS_ONE)


def adjacent_pair() -> LambdaThreshold:
    """Belief that the optimum lies in an adjacent pair needed to run only that pair.

    Seen from the adjacent two-arm study (power C), adding the third dose
    gives ``sqrt(2/3)`` C when the optimum is inside the pair and
    ``sqrt(8/3)`` C when it is not.
    """
    return lambda_threshold(1.0 / power_ratio(ArmChoice.TWO_ARM_EXTREMES),
                            1.0 / power_ratio(ArmChoice.TWO_ARM_ADJACENT),
                            Direction.EXPECTED_BELOW_ONE)


def exclude_middle_threshold() -> float:
    return exclude_middle().value


def adjacent_pair_threshold() -> float:
    return adjacent_pair().value
