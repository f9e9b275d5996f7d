"""End-to-end study orchestration behind the CLI subcommands.

The run store under ``config.output`` holds the synthetic dataset, one
append-only pool file per (study, tolerance), the calibration, and the
study report.  Every stage checks the config digest of what it consumes,
and every random stream is namespaced (data generation, verification,
one namespace per tolerance) so the studies are statistically
independent and resumable.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mlmc_seis import store
from mlmc_seis.calibrate import RateModels, run_verification
from mlmc_seis.config import ConfigError, RunConfig
from mlmc_seis.data import DataSet, generate_synthetic
from mlmc_seis.estimators import (
    SamplePool,
    mc_mean,
    mlmc_estimate,
    mlmc_estimator_variance,
    run_samples,
    sample_variance,
)
from mlmc_seis.medium import sample_material
from mlmc_seis.models import SolverModel, SurrogateModel
from mlmc_seis.plan import InfeasibleToleranceError, Plan, select_hierarchy, select_mc, tolerance_schedule
from mlmc_seis.qoi import qoi_e, qoi_w
from mlmc_seis.rng import make_rng
from mlmc_seis.sls import SlsCoefficients
from mlmc_seis.solver import build_sls_bank, simulate

log = logging.getLogger("mlmc_seis")


def effective_workers(config: RunConfig) -> int:
    env = os.environ.get("MLMC_SEIS_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, config.workers)


def data_path(config: RunConfig) -> Path:
    return config.output / "data.txt"


def calibration_path(config: RunConfig) -> Path:
    return config.output / "calibration.json"


def report_path(config: RunConfig) -> Path:
    return config.output / "report.json"


def _sls_bank(config: RunConfig) -> tuple[SlsCoefficients, ...] | None:
    if not config.attenuation:
        return None
    return build_sls_bank(config.medium, config.source.f0,
                          config.n_mechanisms, config.band)


def build_model(config: RunConfig, data: DataSet | None = None):
    if config.model == "surrogate":
        return SurrogateModel(spec=config.surrogate)
    if data is None:
        if not data_path(config).exists():
            raise FileNotFoundError(
                f"dataset {data_path(config)} not found; run the synth command first"
            )
        data = store.read_dataset(data_path(config))
    return SolverModel(
        medium=config.medium, unc=config.unc, source=config.source,
        geometry=config.geometry, h0=config.h0, dt0=config.dt0,
        qoi_kind=config.qoi, data=data, attenuation=config.attenuation,
        sls_bank=_sls_bank(config), c_cfl=config.c_cfl,
        sponge_cells=config.sponge_cells, sponge_strength=config.sponge_strength,
    )


def cmd_synth(config: RunConfig) -> Path:
    """Generate and store the synthetic dataset (no-op for the surrogate)."""
    if config.model == "surrogate":
        raise ConfigError("the surrogate model needs no synthetic dataset")
    config.output.mkdir(parents=True, exist_ok=True)
    key = f"{config.seed}/data"
    theta_star = sample_material(config.medium, config.unc, f"{key}/material")
    ds = generate_synthetic(
        config.medium, theta_star, config.source, config.data_geometry,
        config.level(config.data_fine_level), config.data_rate, config.data_sigma,
        key, max_level=config.l_max, attenuation=config.attenuation,
        sls_bank=_sls_bank(config), c_cfl=config.c_cfl,
        sponge_cells=config.sponge_cells, sponge_strength=config.sponge_strength,
    )
    ds.meta["config_digest"] = config.digest
    store.write_dataset(data_path(config), ds)
    log.info("dataset written to %s (sigma=%.4g)", data_path(config), ds.sigma)
    return data_path(config)


def cmd_verify(config: RunConfig) -> Path:
    """Run the verification study and write the calibration file.

    Verification samples run one at a time: the per-level work anchors
    feed the planner's cost model, and concurrent solves contending for
    memory bandwidth would distort the measured level-to-level ratios.
    """
    config.output.mkdir(parents=True, exist_ok=True)
    model = build_model(config)
    pool_path = config.output / "pool_verify.jsonl"
    pool = store.load_pool(pool_path, {"qoi_kind": config.qoi})
    rm = run_verification(
        model, config.study.verification_counts, pool,
        run_id=f"{config.seed}/verify",
        gamma=config.rates_gamma, q_w=config.rates_q_w, q_s=config.rates_q_s,
        pool_path=pool_path, workers=1,
        resamples=config.study.bootstrap_resamples, config_digest=config.digest,
    )
    store.save_json(calibration_path(config), rm.to_dict())
    diag = rm.diagnostics
    with open(config.output / "verification_diagnostics.csv", "w") as fh:
        fh.write("level,count,mean_work_s,fine_variance,var_anchor,"
                 "correction_mean,bias_anchor,correction_variance,dvar_anchor\n")
        for level in range(rm.l_ver + 1):
            row = [level, diag["counts"][level], diag["mean_work"][level],
                   diag["fine_variances"][level], rm.var0_anchors[level]]
            if level >= 1:
                row += [diag["correction_means"][level - 1],
                        rm.bias_anchors[level - 1],
                        diag["correction_variances"][level - 1],
                        rm.dvar_anchors[level - 1]]
            else:
                row += ["", "", "", ""]
            fh.write(",".join(str(x) for x in row) + "\n")
    log.info("calibration written to %s", calibration_path(config))
    return calibration_path(config)


def load_calibration(config: RunConfig) -> RateModels:
    path = calibration_path(config)
    if not path.exists():
        raise FileNotFoundError(f"calibration {path} not found; run the verify command first")
    rm = RateModels.from_dict(store.load_json(path))
    if rm.config_digest and rm.config_digest != config.digest:
        raise ConfigError(
            f"calibration {path} belongs to config {rm.config_digest}, not {config.digest}"
        )
    return rm


def cmd_plan(config: RunConfig) -> list[dict]:
    """Plan both estimators for every tolerance; raises if none is feasible."""
    rm = load_calibration(config)
    rows = []
    feasible = 0
    for k, tol in enumerate(tolerance_schedule(config.study.tol1, config.study.n_tolerances), 1):
        row: dict = {"k": k, "tol": tol}
        try:
            row["mlmc"] = select_hierarchy(tol, config.study.c_alpha, config.l_max, rm).to_dict()
            feasible += 1
        except InfeasibleToleranceError as exc:
            row["mlmc"] = None
            row["infeasible"] = str(exc)
        try:
            row["mc"] = select_mc(tol, config.study.c_alpha, config.l_max, rm).to_dict()
        except InfeasibleToleranceError:
            row["mc"] = None
        rows.append(row)
    store.save_json(config.output / "plans.json", {"config_digest": config.digest, "plans": rows})
    if feasible == 0:
        raise InfeasibleToleranceError(
            tolerance_schedule(config.study.tol1, config.study.n_tolerances)[-1],
            min(rm.bias_anchors),
        )
    return rows


@dataclass
class _PooledLevels:
    """Per-level value lists merged across pools, in deterministic order."""

    fine: dict[int, list[float]]
    corrections: dict[int, list[float]]

    @classmethod
    def merge(cls, pools: list[SamplePool]) -> "_PooledLevels":
        fine: dict[int, list[float]] = {}
        corrections: dict[int, list[float]] = {}
        for pool in pools:
            for level in pool.levels():
                for rec in pool.level_records(level):
                    fine.setdefault(level, []).append(rec.fine)
                    if rec.coarse is not None:
                        corrections.setdefault(level, []).append(rec.fine - rec.coarse)
        return cls(fine=fine, corrections=corrections)

    def reference(self, l0: int, top: int) -> tuple[float, float, dict[int, int]]:
        """Pooled telescoping estimate, its variance, and the pooled counts."""
        counts = {l0: len(self.fine[l0])}
        value = mc_mean(self.fine[l0])
        variance = sample_variance(self.fine[l0]) / counts[l0]
        for level in range(l0 + 1, top + 1):
            vals = self.corrections.get(level, [])
            if len(vals) < 2:
                continue
            counts[level] = len(vals)
            value += mc_mean(vals)
            variance += sample_variance(vals) / len(vals)
        return value, variance, counts

    def resample_estimate(self, plan: Plan, rng: np.random.Generator) -> float:
        """One bootstrap replication of the estimator from the pooled samples."""
        base = np.asarray(self.fine[plan.l0])
        total = float(np.mean(rng.choice(base, size=plan.n_samples[0], replace=True)))
        for level, n in zip(plan.level_range()[1:], plan.n_samples[1:]):
            vals = np.asarray(self.corrections[level])
            total += float(np.mean(rng.choice(vals, size=n, replace=True)))
        return total


def run_plan_samples(config: RunConfig, model, plan: Plan, run_id: str,
                     pool_path: Path) -> SamplePool:
    pool = store.load_pool(pool_path, {"qoi_kind": config.qoi})
    workers = effective_workers(config)
    for level, n in zip(plan.level_range(), plan.n_samples):
        kind = "fine-only" if level == plan.l0 else "coupled"
        run_samples(model, level, kind, n, pool, run_id,
                    pool_path=pool_path, workers=workers)
    return pool


def measured_work(pool: SamplePool, plan: Plan) -> float:
    return sum(
        pool.total_work(level, n) for level, n in zip(plan.level_range(), plan.n_samples)
    )


def cmd_run(config: RunConfig) -> dict:
    """Execute the tolerance study and write the report."""
    rm = load_calibration(config)
    model = build_model(config)
    config.output.mkdir(parents=True, exist_ok=True)
    tols = tolerance_schedule(config.study.tol1, config.study.n_tolerances)

    entries = []
    pools: list[SamplePool] = [store.load_pool(config.output / "pool_verify.jsonl")]
    top_used, l0_used = 0, None
    for k, tol in enumerate(tols, 1):
        entry: dict = {"k": k, "tol": tol}
        try:
            plan_mlmc = select_hierarchy(tol, config.study.c_alpha, config.l_max, rm)
        except InfeasibleToleranceError as exc:
            log.warning("tolerance %g skipped: %s", tol, exc)
            entry["infeasible"] = str(exc)
            entries.append(entry)
            continue
        run_id = f"{config.seed}/tol{k:02d}"
        pool_path = config.output / f"pool_tol{k:02d}.jsonl"
        pool = run_plan_samples(config, model, plan_mlmc, run_id, pool_path)
        pools.append(pool)
        top_used = max(top_used, plan_mlmc.top)
        l0_used = plan_mlmc.l0 if l0_used is None else min(l0_used, plan_mlmc.l0)
        entry["mlmc"] = {
            "plan": plan_mlmc.to_dict(),
            "estimate": mlmc_estimate(pool, plan_mlmc),
            "estimator_variance": mlmc_estimator_variance(pool, plan_mlmc),
            "measured_work": measured_work(pool, plan_mlmc),
        }

        try:
            plan_mc = select_mc(tol, config.study.c_alpha, config.l_max, rm)
        except InfeasibleToleranceError:
            plan_mc = None
        if plan_mc is not None:
            entry["mc"] = {"plan": plan_mc.to_dict(), "executed": False}
            if plan_mc.predicted_work <= config.study.mc_budget_s:
                mc_pool_path = config.output / f"pool_tol{k:02d}_mc.jsonl"
                mc_pool = store.load_pool(mc_pool_path, {"qoi_kind": config.qoi})
                run_samples(model, plan_mc.top, "fine-only", plan_mc.n_samples[0],
                            mc_pool, f"{run_id}/mc", pool_path=mc_pool_path,
                            workers=effective_workers(config))
                values = mc_pool.fine_values(plan_mc.top, plan_mc.n_samples[0])
                entry["mc"].update(
                    executed=True,
                    estimate=mc_mean(values),
                    estimator_variance=sample_variance(values) / plan_mc.n_samples[0],
                    measured_work=mc_pool.total_work(plan_mc.top, plan_mc.n_samples[0]),
                )
        entries.append(entry)

    if l0_used is None:
        raise InfeasibleToleranceError(tols[-1], min(rm.bias_anchors))

    report: dict = {"config_digest": config.digest, "qoi_kind": config.qoi,
                    "tolerances": entries}
    if l0_used is not None:
        merged = _PooledLevels.merge(pools)
        ref_value, ref_variance, counts = merged.reference(l0_used, top_used)
        report["reference"] = {
            "value": ref_value, "estimator_variance": ref_variance,
            "l0": l0_used, "top": top_used,
            "pool_counts": {str(k): v for k, v in counts.items()},
        }
        rng = make_rng(f"{config.seed}/bootstrap-errors")
        for entry in entries:
            if "mlmc" not in entry:
                continue
            plan = Plan.from_dict(entry["mlmc"]["plan"])
            errors = [
                merged.resample_estimate(plan, rng) - ref_value
                for _ in range(config.study.error_replications)
            ]
            entry["mlmc"]["error_vs_reference"] = entry["mlmc"]["estimate"] - ref_value
            entry["mlmc"]["bootstrap_errors"] = errors

    store.save_json(report_path(config), report)
    log.info("report written to %s", report_path(config))
    return report


def cmd_attencmp(config: RunConfig, levels: tuple[int, ...] = (1, 2)) -> list[dict]:
    """Both misfits with attenuation on/off for one fixed material draw."""
    if config.model == "surrogate":
        raise ConfigError("attenuation comparison needs the wave solver")
    data = store.read_dataset(data_path(config))
    sample = sample_material(config.medium, config.unc, f"{config.seed}/attencmp")
    bank = build_sls_bank(config.medium, config.source.f0,
                          config.n_mechanisms, config.band)
    rows = []
    for level in levels:
        seis = {}
        for atten in (False, True):
            result = simulate(
                config.medium, sample, config.source, config.geometry,
                config.level(level), attenuation=atten, sls_bank=bank,
                c_cfl=config.c_cfl, sponge_cells=config.sponge_cells,
                sponge_strength=config.sponge_strength,
            )
            seis[atten] = result.seismograms
        for kind, fn in (("E", qoi_e), ("W", qoi_w)):
            elastic = fn(seis[False], data)
            attenuated = fn(seis[True], data)
            rows.append({
                "qoi": kind, "level": level,
                "elastic": elastic, "attenuated": attenuated,
                "change_pct": 100.0 * (attenuated - elastic) / elastic
                if elastic != 0 else math.nan,
            })
    config.output.mkdir(parents=True, exist_ok=True)
    store.save_json(config.output / "attenuation_comparison.json",
                    {"config_digest": config.digest, "rows": rows})
    with open(config.output / "attenuation_comparison.csv", "w") as fh:
        fh.write("qoi,level,elastic,attenuated,change_pct\n")
        for r in rows:
            fh.write(f"{r['qoi']},{r['level']},{r['elastic']!r},"
                     f"{r['attenuated']!r},{r['change_pct']:.2f}\n")
    return rows
