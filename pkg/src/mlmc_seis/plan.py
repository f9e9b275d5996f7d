"""Brute-force selection of estimator hierarchies for a target tolerance.

For every admissible (base level, top level) pair the bias model fixes
the error splitting, the optimal per-level sample counts follow in closed
form, and the pair with the least predicted work wins (ties: smaller top
level, then smaller base level).  Single-level plans use the same scan
restricted to one level.  Predicted work includes the integer ceiling on
the sample counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from mlmc_seis.calibrate import RateModels, model_bias, model_variance, model_work


class InfeasibleToleranceError(ValueError):
    """No admissible top level meets the bias constraint for this tolerance."""

    def __init__(self, tol: float, min_bias: float) -> None:
        super().__init__(
            f"tolerance {tol:g} is infeasible: smallest achievable bias is {min_bias:g}"
        )
        self.tol = tol
        self.min_bias = min_bias


@dataclass(frozen=True)
class Plan:
    """One estimator hierarchy: levels l0..L with per-level sample counts."""

    kind: str  # "MC" | "MLMC"
    l0: int
    top: int
    n_samples: tuple[int, ...]
    theta: float
    c_alpha: float
    tol: float
    predicted_work: float
    predicted_bias: float

    def __post_init__(self) -> None:
        if self.kind not in ("MC", "MLMC"):
            raise ValueError("kind must be 'MC' or 'MLMC'")
        if not 0 <= self.l0 <= self.top:
            raise ValueError("need 0 <= l0 <= top")
        if len(self.n_samples) != self.top - self.l0 + 1:
            raise ValueError("need one sample count per level")
        if any(n < 2 for n in self.n_samples):
            raise ValueError("each level needs at least two samples")
        if not self.predicted_bias < self.tol:
            raise ValueError("predicted bias must stay below the tolerance")
        if not 0 < self.theta < 1:
            raise ValueError("splitting must lie in (0, 1)")

    def level_range(self) -> list[int]:
        return list(range(self.l0, self.top + 1))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "l0": self.l0, "top": self.top,
            "n_samples": list(self.n_samples), "theta": self.theta,
            "c_alpha": self.c_alpha, "tol": self.tol,
            "predicted_work": self.predicted_work,
            "predicted_bias": self.predicted_bias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Plan":
        return cls(
            kind=d["kind"], l0=d["l0"], top=d["top"],
            n_samples=tuple(d["n_samples"]), theta=d["theta"],
            c_alpha=d["c_alpha"], tol=d["tol"],
            predicted_work=d["predicted_work"], predicted_bias=d["predicted_bias"],
        )

    def satisfies_variance_bound(self, rm: RateModels) -> bool:
        lhs = sum(
            model_variance(rm, level, self.l0) / n
            for level, n in zip(self.level_range(), self.n_samples)
        )
        return lhs <= (self.theta * self.tol / self.c_alpha) ** 2 * (1 + 1e-12)


def optimal_samples(
    tol: float,
    theta: float,
    c_alpha: float,
    variances: list[float],
    works: list[float],
) -> list[int]:
    """Work-minimizing sample counts under the statistical error budget.

    N_l = max(2, ceil((c_alpha/(theta tol))^2 sqrt(V_l/W_l) sum_k sqrt(W_k V_k))).
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if not 0 < theta < 1:
        raise ValueError("splitting must lie in (0, 1)")
    if len(variances) != len(works) or not variances:
        raise ValueError("need matching nonempty variance and work lists")
    if any(v <= 0 for v in variances) or any(w <= 0 for w in works):
        raise ValueError("variances and works must be positive")
    budget = (c_alpha / (theta * tol)) ** 2
    cross = sum(math.sqrt(w * v) for w, v in zip(works, variances))
    return [
        max(2, math.ceil(budget * math.sqrt(v / w) * cross))
        for v, w in zip(variances, works)
    ]


def _plan_for(kind: str, l0: int, top: int, tol: float, c_alpha: float,
              rm: RateModels) -> Plan | None:
    bias = model_bias(rm, top)
    if not bias < tol:
        return None
    theta = 1.0 - bias / tol
    levels = list(range(l0, top + 1))
    variances = [model_variance(rm, level, l0) for level in levels]
    works = [model_work(rm, level) for level in levels]
    n_samples = optimal_samples(tol, theta, c_alpha, variances, works)
    predicted = sum(n * w for n, w in zip(n_samples, works))
    return Plan(
        kind=kind, l0=l0, top=top, n_samples=tuple(n_samples), theta=theta,
        c_alpha=c_alpha, tol=tol, predicted_work=predicted, predicted_bias=bias,
    )


def select_hierarchy(tol: float, c_alpha: float, l_max: int, rm: RateModels) -> Plan:
    """Exhaustive scan over (l0, L); least predicted work wins."""
    best: Plan | None = None
    for l0 in range(l_max + 1):
        for top in range(l0, l_max + 1):
            plan = _plan_for("MLMC", l0, top, tol, c_alpha, rm)
            if plan is None:
                continue
            if best is None or (plan.predicted_work, plan.top, plan.l0) < (
                best.predicted_work, best.top, best.l0
            ):
                best = plan
    if best is None:
        raise InfeasibleToleranceError(
            tol, min(model_bias(rm, level) for level in range(l_max + 1))
        )
    return best


def select_mc(tol: float, c_alpha: float, l_max: int, rm: RateModels) -> Plan:
    """Single-level scan with the same bias and variance models."""
    best: Plan | None = None
    for level in range(l_max + 1):
        plan = _plan_for("MC", level, level, tol, c_alpha, rm)
        if plan is None:
            continue
        if best is None or (plan.predicted_work, plan.top) < (
            best.predicted_work, best.top
        ):
            best = plan
    if best is None:
        raise InfeasibleToleranceError(
            tol, min(model_bias(rm, level) for level in range(l_max + 1))
        )
    return best


def mc_optimal_splitting(gamma: float, q_w: float) -> float:
    """Asymptotically optimal splitting for single-level estimation."""
    if not (gamma > 0 and q_w > 0):
        raise ValueError("gamma and q_w must be positive")
    return 1.0 / (1.0 + gamma / (2.0 * q_w))


def tolerance_schedule(tol1: float, k_max: int) -> list[float]:
    """Decreasing tolerances tol1 * (1/sqrt(2))^(k-1), k = 1..k_max."""
    if not tol1 > 0:
        raise ValueError("tol1 must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    return [tol1 * 2.0 ** (-(k - 1) / 2.0) for k in range(1, k_max + 1)]
