"""Report records shared by the verification suites."""

import json
import math
from dataclasses import dataclass, field

HOLDS = "holds"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"


@dataclass
class BoundReport:
    """An evaluated constant next to an empirical measurement and a verdict."""

    bound_name: str
    parameters: dict
    theoretical_value: float
    empirical_value: float
    stderr: float = 0.0
    verdict: str = INCONCLUSIVE
    witness: tuple | None = None
    details: dict = field(default_factory=dict)

    @property
    def margin(self):
        """Slack theoretical - empirical (positive when the bound holds)."""
        return self.theoretical_value - self.empirical_value

    def to_dict(self):
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            if hasattr(v, "tolist"):
                return v.tolist()
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return {
            "record": "bound_report",
            "bound_name": self.bound_name,
            "parameters": clean(self.parameters),
            "theoretical_value": clean(self.theoretical_value),
            "empirical_value": clean(self.empirical_value),
            "stderr": self.stderr,
            "verdict": self.verdict,
            "witness": clean(self.witness),
            "details": clean(self.details),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def one_sided_verdict(empirical, theoretical, stderr=0.0, tol=0.0):
    """holds iff empirical <= theoretical + 3*stderr + tol."""
    if math.isnan(empirical) or math.isnan(theoretical):
        return INCONCLUSIVE
    if empirical <= theoretical + 3.0 * stderr + tol:
        return HOLDS
    return VIOLATED


def two_sided_verdict(empirical, target, stderr=0.0, tol=0.0):
    """holds iff |empirical - target| <= 3*stderr + tol."""
    if math.isnan(empirical) or math.isnan(target):
        return INCONCLUSIVE
    if abs(empirical - target) <= 3.0 * stderr + tol:
        return HOLDS
    return VIOLATED
