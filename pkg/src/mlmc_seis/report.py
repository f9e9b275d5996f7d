"""CSV tables and SVG figures rendered from a completed study report.

Everything is read from the stored report; nothing is recomputed from the
forward model.  Regenerating from the same report and config digest is
byte-identical (fixed SVG hash salt, no embedded dates).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

# reference savings at the finest tolerances of the full-scale study
SAVINGS_REFERENCE = {"E": 0.97, "W": 0.78}

matplotlib.rcParams["svg.hashsalt"] = "mlmc-seis"


def _savefig(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return "--"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def mc_work_for_entry(entry: dict) -> float | None:
    """Measured MC work when executed, otherwise the predicted work."""
    mc = entry.get("mc")
    if mc is None:
        return None
    if mc.get("executed"):
        return mc["measured_work"]
    return mc["plan"]["predicted_work"]


def render(report: dict, out_dir: Path, plots: bool = True) -> list[Path]:
    """Emit all tables (and figures when enabled); returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = [e for e in report.get("tolerances", [])]
    done = [e for e in entries if "mlmc" in e]
    written = []

    level_lo = min((e["mlmc"]["plan"]["l0"] for e in done), default=0)
    level_hi = max((e["mlmc"]["plan"]["top"] for e in done), default=0)
    levels = list(range(level_lo, level_hi + 1))

    rows = []
    for e in entries:
        row = [e["k"], _fmt(e["tol"])]
        if "mlmc" in e:
            plan = e["mlmc"]["plan"]
            counts = {l: n for l, n in zip(range(plan["l0"], plan["top"] + 1),
                                           plan["n_samples"])}
            row += [counts.get(l, "--") for l in levels]
            row += [_fmt(plan["theta"]), _fmt(plan["predicted_work"]),
                    _fmt(e["mlmc"]["measured_work"]), _fmt(e["mlmc"]["estimate"]),
                    _fmt(e["mlmc"]["estimator_variance"])]
        else:
            row += ["--"] * (len(levels) + 5)
        rows.append(row)
    path = out_dir / "plans_mlmc.csv"
    _write_csv(path, ["k", "tol"] + [f"N_l{l}" for l in levels]
               + ["theta", "predicted_work_s", "measured_work_s", "estimate",
                  "estimator_variance"], rows)
    written.append(path)

    rows = []
    for e in entries:
        mc = e.get("mc")
        if mc is None:
            rows.append([e["k"], _fmt(e["tol"])] + ["--"] * 5)
            continue
        plan = mc["plan"]
        rows.append([
            e["k"], _fmt(e["tol"]), plan["top"], plan["n_samples"][0],
            _fmt(plan["predicted_work"]),
            _fmt(mc.get("measured_work")), _fmt(mc.get("estimate")),
        ])
    path = out_dir / "plans_mc.csv"
    _write_csv(path, ["k", "tol", "level", "N", "predicted_work_s",
                      "measured_work_s", "estimate"], rows)
    written.append(path)

    rows = []
    for e in done:
        w_mc = mc_work_for_entry(e)
        w_ml = e["mlmc"]["measured_work"]
        savings = None if w_mc is None else 1.0 - w_ml / w_mc
        rows.append([e["k"], _fmt(e["tol"]), _fmt(w_ml), _fmt(w_mc), _fmt(savings)])
    path = out_dir / "savings.csv"
    _write_csv(path, ["k", "tol", "work_mlmc_s", "work_mc_s", "savings"], rows)
    written.append(path)

    if "reference" in report:
        ref = report["reference"]
        path = out_dir / "reference.csv"
        _write_csv(path, ["value", "estimator_variance", "l0", "top"]
                   + [f"pool_N_l{k}" for k in sorted(ref["pool_counts"], key=int)],
                   [[_fmt(ref["value"]), _fmt(ref["estimator_variance"]),
                     ref["l0"], ref["top"]]
                    + [ref["pool_counts"][k] for k in sorted(ref["pool_counts"], key=int)]])
        written.append(path)

        rows = []
        for e in done:
            for i, err in enumerate(e["mlmc"].get("bootstrap_errors", [])):
                rows.append([e["k"], _fmt(e["tol"]), i, _fmt(err)])
        path = out_dir / "bootstrap_errors.csv"
        _write_csv(path, ["k", "tol", "replicate", "error"], rows)
        written.append(path)

    if plots and done:
        written += _render_plots(report, done, out_dir)
    return written


def _render_plots(report: dict, done: list[dict], out_dir: Path) -> list[Path]:
    written = []
    tols = [e["tol"] for e in done]
    w_ml = [e["mlmc"]["measured_work"] for e in done]
    w_ml_pred = [e["mlmc"]["plan"]["predicted_work"] for e in done]

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(tols, w_ml, "o-", label="MLMC measured")
    ax.loglog(tols, w_ml_pred, ":", label="MLMC predicted")
    mc_pts = [(e["tol"], mc_work_for_entry(e)) for e in done
              if mc_work_for_entry(e) is not None]
    if mc_pts:
        ax.loglog(*zip(*mc_pts), "s-", label="MC (measured or predicted)")
    anchor = w_ml[len(w_ml) // 2]
    guide = [anchor * (t / tols[len(w_ml) // 2]) ** -2 for t in tols]
    ax.loglog(tols, guide, "--", color="gray", label="slope -2")
    ax.set_xlabel("tolerance")
    ax.set_ylabel("work [core s]")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "work_vs_tol.svg"
    _savefig(fig, path)
    written.append(path)

    if "reference" in report:
        fig, ax = plt.subplots(figsize=(5, 4))
        for e in done:
            errs = e["mlmc"].get("bootstrap_errors", [])
            ax.loglog([e["tol"]] * len(errs), [abs(x) for x in errs], "x",
                      color="black", alpha=0.35, markersize=3)
            ax.loglog([e["tol"]], [abs(e["mlmc"]["error_vs_reference"])], "o",
                      color="red")
        lim = [min(tols), max(tols)]
        ax.loglog(lim, lim, "--", color="gray", label="error = tol")
        ax.set_xlabel("tolerance")
        ax.set_ylabel("|estimate - reference|")
        ax.invert_xaxis()
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / "error_vs_tol.svg"
        _savefig(fig, path)
        written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    budget = [e["mlmc"]["plan"]["theta"] * e["tol"] / e["mlmc"]["plan"]["c_alpha"]
              for e in done]
    stat = [math.sqrt(e["mlmc"]["estimator_variance"]) for e in done]
    ax.loglog(tols, stat, "o-", label="sqrt(estimator variance)")
    ax.loglog(tols, budget, "--", label="theta tol / c_alpha")
    ax.set_xlabel("tolerance")
    ax.set_ylabel("statistical error")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "stat_error_vs_tol.svg"
    _savefig(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    pts = [(e["tol"], 1.0 - e["mlmc"]["measured_work"] / mc_work_for_entry(e))
           for e in done if mc_work_for_entry(e) is not None]
    if pts:
        ax.semilogx(*zip(*pts), "o-", label="1 - W_MLMC / W_MC")
    ref = SAVINGS_REFERENCE.get(report.get("qoi_kind", ""), None)
    if ref is not None:
        ax.axhline(ref, color="gray", linestyle="--",
                   label=f"full-scale reference {ref:.0%}")
    ax.set_xlabel("tolerance")
    ax.set_ylabel("work savings")
    ax.set_ylim(0, 1)
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "savings_vs_tol.svg"
    _savefig(fig, path)
    written.append(path)
    return written
