"""Verification run and the work/bias/variance models fed to the planner.

A small pilot study on levels 0..L_ver measures mean core time per level
and produces conservative anchors: the largest absolute endpoint of the
bootstrapped 95% confidence interval of each correction mean (bias), and
the upper endpoints for the sample variances of the base-level values and
of the corrections.  Beyond the verification top level the anchors are
extrapolated geometrically with the configured rates; the rates
themselves are configured rather than fitted because the coarse levels
sit in a pre-asymptotic regime, and the measured log2 ratios are kept as
diagnostics only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mlmc_seis.estimators import SamplePool, bootstrap_ci, run_samples


@dataclass(frozen=True)
class RateModels:
    """Calibrated work/bias/variance models from a verification run."""

    gamma: float
    q_w: float
    q_s: float
    work: tuple[float, ...]          # mean core time, levels 0..l_ver
    bias_anchors: tuple[float, ...]  # |mean dQ_l| CI bound, levels 1..l_ver
    var0_anchors: tuple[float, ...]  # Var[Q_l] CI bound, levels 0..l_ver
    dvar_anchors: tuple[float, ...]  # Var[dQ_l] CI bound, levels 1..l_ver
    l_ver: int
    config_digest: str = ""
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.l_ver < 1:
            raise ValueError("verification needs at least two levels")
        if len(self.work) != self.l_ver + 1 or len(self.var0_anchors) != self.l_ver + 1:
            raise ValueError("work and base-variance anchors must cover levels 0..l_ver")
        if len(self.bias_anchors) != self.l_ver or len(self.dvar_anchors) != self.l_ver:
            raise ValueError("correction anchors must cover levels 1..l_ver")
        for name in ("work", "bias_anchors", "var0_anchors", "dvar_anchors"):
            if any(not v > 0 for v in getattr(self, name)):
                raise ValueError(f"{name} must be strictly positive")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "q_w": self.q_w, "q_s": self.q_s,
            "work": list(self.work), "bias_anchors": list(self.bias_anchors),
            "var0_anchors": list(self.var0_anchors),
            "dvar_anchors": list(self.dvar_anchors),
            "l_ver": self.l_ver, "config_digest": self.config_digest,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RateModels":
        return cls(
            gamma=d["gamma"], q_w=d["q_w"], q_s=d["q_s"],
            work=tuple(d["work"]), bias_anchors=tuple(d["bias_anchors"]),
            var0_anchors=tuple(d["var0_anchors"]),
            dvar_anchors=tuple(d["dvar_anchors"]),
            l_ver=d["l_ver"], config_digest=d.get("config_digest", ""),
            diagnostics=d.get("diagnostics", {}),
        )


def model_work(rm: RateModels, level: int) -> float:
    """Measured mean core time up to l_ver, then geometric growth 2^gamma."""
    if level <= rm.l_ver:
        return rm.work[level]
    return rm.work[rm.l_ver] * 2.0 ** (rm.gamma * (level - rm.l_ver))


def model_bias(rm: RateModels, level: int) -> float:
    """Bias bound: next correction's anchor below l_ver, then weak-rate decay."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level < rm.l_ver:
        return rm.bias_anchors[level]  # anchor of dQ_(level+1)
    return rm.bias_anchors[rm.l_ver - 1] * 2.0 ** (-rm.q_w * (level - (rm.l_ver - 1)))


def model_variance(rm: RateModels, level: int, base_level: int) -> float:
    """Base-level value variance at l = l0, correction variances above."""
    if level < base_level:
        raise ValueError("level must be >= base_level")
    if level == base_level:
        return rm.var0_anchors[min(level, rm.l_ver)]
    if level <= rm.l_ver:
        return rm.dvar_anchors[level - 1]
    return rm.dvar_anchors[rm.l_ver - 1] * 2.0 ** (-rm.q_s * (level - rm.l_ver))


def _log2_ratios(values: np.ndarray) -> list[float]:
    return [float(np.log2(b / a)) if a > 0 and b > 0 else float("nan")
            for a, b in zip(values[:-1], values[1:])]


def run_verification(
    model,
    counts: tuple[int, ...],
    pool: SamplePool,
    run_id: str,
    gamma: float,
    q_w: float,
    q_s: float,
    pool_path=None,
    workers: int = 1,
    resamples: int = 1000,
    config_digest: str = "",
) -> RateModels:
    """Sample levels 0..len(counts)-1 and calibrate all model anchors.

    Level 0 is sampled fine-only, higher levels coupled.  Counts below 2
    per level are rejected (at least ~10 recommended for usable anchors).
    """
    if len(counts) < 2 or any(c < 2 for c in counts):
        raise ValueError("need >= 2 levels with >= 2 samples each")
    l_ver = len(counts) - 1
    for level, count in enumerate(counts):
        kind = "fine-only" if level == 0 else "coupled"
        run_samples(model, level, kind, count, pool, run_id,
                    pool_path=pool_path, workers=workers)

    work = tuple(
        pool.total_work(level, counts[level]) / counts[level] for level in range(l_ver + 1)
    )
    var0, dmeans, dvars, bias_anchors, dvar_anchors = [], [], [], [], []
    var0_anchors = []
    for level in range(l_ver + 1):
        fine = pool.fine_values(level, counts[level])
        var0.append(float(np.var(fine, ddof=1)))
        _, hi = bootstrap_ci(fine, "variance", resamples, 0.95,
                             rng=f"{run_id}/ci/var0/{level}")
        var0_anchors.append(hi)
    for level in range(1, l_ver + 1):
        deltas = pool.correction_values(level, counts[level])
        dmeans.append(float(np.mean(deltas)))
        dvars.append(float(np.var(deltas, ddof=1)))
        lo, hi = bootstrap_ci(deltas, "mean", resamples, 0.95,
                              rng=f"{run_id}/ci/bias/{level}")
        bias_anchors.append(max(abs(lo), abs(hi)))
        _, hi = bootstrap_ci(deltas, "variance", resamples, 0.95,
                             rng=f"{run_id}/ci/dvar/{level}")
        dvar_anchors.append(hi)

    diagnostics = {
        "counts": list(counts),
        "mean_work": list(work),
        "fine_variances": var0,
        "correction_means": dmeans,
        "correction_variances": dvars,
        "work_log2_ratios": _log2_ratios(np.array(work)),
        "bias_log2_ratios": _log2_ratios(np.abs(dmeans)),
        "dvar_log2_ratios": _log2_ratios(np.array(dvars)),
    }
    return RateModels(
        gamma=gamma, q_w=q_w, q_s=q_s,
        work=work,
        bias_anchors=tuple(bias_anchors),
        var0_anchors=tuple(var0_anchors),
        dvar_anchors=tuple(dvar_anchors),
        l_ver=l_ver,
        config_digest=config_digest,
        diagnostics=diagnostics,
    )
