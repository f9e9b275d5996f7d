"""Run configuration: a single TOML file drives every subcommand.

The loader builds the domain objects (medium, uncertainty, source,
geometries, surrogate), checks internal consistency (time grids
commensurate with the observation rate, CFL headroom for every admissible
sample, padding at least the no-reflection bound), and digests the file
so stores can refuse cross-configuration reuse.
"""

from __future__ import annotations

import hashlib
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from mlmc_seis.medium import LayerSpec, LayeredMedium, UncertaintySpec
from mlmc_seis.solver import Geometry, Level, SourceSpec, required_padding
from mlmc_seis.surrogate import SurrogateSpec


class ConfigError(ValueError):
    """The configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class StudySettings:
    c_alpha: float
    tol1: float
    n_tolerances: int
    verification_counts: tuple[int, ...]
    mc_budget_s: float
    bootstrap_resamples: int = 1000
    error_replications: int = 100


@dataclass(frozen=True)
class RunConfig:
    model: str
    qoi: str
    seed: str
    workers: int
    output: Path
    digest: str
    rates_gamma: float
    rates_q_w: float
    rates_q_s: float
    study: StudySettings
    surrogate: SurrogateSpec | None = None
    medium: LayeredMedium | None = None
    unc: UncertaintySpec | None = None
    source: SourceSpec | None = None
    geometry: Geometry | None = None
    data_geometry: Geometry | None = None
    h0: float = 0.0
    dt0: float = 0.0
    l_max: int = 0
    c_cfl: float = 0.45
    sponge_cells: int = 36
    sponge_strength: float = 3.0
    attenuation: bool = True
    n_mechanisms: int = 3
    band: tuple[float, float] | None = None
    data_rate: float = 0.0
    data_sigma: float | None = None
    data_fine_level: int = 0
    extra: dict = field(default_factory=dict)

    def level(self, index: int) -> Level:
        return Level.from_base(self.h0, self.dt0, index)


def preset_path(name: str) -> Path:
    path = resources.files("mlmc_seis") / "presets" / f"{name}.toml"
    return Path(str(path))


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing '{key}' in [{where}]")
    return table[key]


def _is_integral(x: float) -> bool:
    return abs(x - round(x)) < 1e-9


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(raw_bytes.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    digest = hashlib.sha256(raw_bytes).hexdigest()[:16]

    try:
        return _build_config(raw, digest, path)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def _build_config(raw: dict, digest: str, path: Path) -> RunConfig:
    run = raw.get("run", {})
    model = _require(run, "model", "run")
    if model not in ("solver", "surrogate"):
        raise ConfigError(f"model must be 'solver' or 'surrogate', got {model!r}")
    qoi = run.get("qoi", "E")
    if qoi not in ("E", "W"):
        raise ConfigError(f"qoi must be 'E' or 'W', got {qoi!r}")
    output = Path(run.get("output", "runs/" + path.stem))
    if not output.is_absolute():
        output = path.parent / output

    rates = raw.get("rates", {})
    gamma = float(rates.get("gamma", 3.0))
    q_w = float(rates.get("q_w", 2.0))
    q_s = float(rates.get("q_s", 4.0))

    study_raw = raw.get("study", {})
    study = StudySettings(
        c_alpha=float(study_raw.get("c_alpha", 2.0)),
        tol1=float(_require(study_raw, "tol1", "study")),
        n_tolerances=int(study_raw.get("n_tolerances", 6)),
        verification_counts=tuple(int(c) for c in _require(study_raw, "verification_counts", "study")),
        mc_budget_s=float(study_raw.get("mc_budget_s", math.inf)),
        bootstrap_resamples=int(study_raw.get("bootstrap_resamples", 1000)),
        error_replications=int(study_raw.get("error_replications", 100)),
    )

    common = dict(
        model=model, qoi=qoi,
        seed=str(run.get("seed", path.stem)),
        workers=int(run.get("workers", 1)),
        output=output, digest=digest,
        rates_gamma=gamma, rates_q_w=q_w, rates_q_s=q_s,
        study=study,
    )

    if model == "surrogate":
        sur = raw.get("surrogate", {})
        spec = SurrogateSpec(
            dim=int(sur.get("dim", 3)),
            q_w=float(sur.get("q_w", q_w)),
            gamma=float(sur.get("gamma", gamma)),
            c_b=float(sur.get("c_b", 1.0)),
            w0=float(sur.get("w0", 1e-4)),
        )
        l_max = int(raw.get("hierarchy", {}).get("l_max", 8))
        return RunConfig(surrogate=spec, l_max=l_max, **common)

    hierarchy = raw.get("hierarchy", {})
    h0 = float(_require(hierarchy, "h0", "hierarchy"))
    dt0 = float(_require(hierarchy, "dt0", "hierarchy"))
    l_max = int(_require(hierarchy, "l_max", "hierarchy"))
    c_cfl = float(hierarchy.get("c_cfl", 0.45))
    sponge_cells = int(hierarchy.get("sponge_cells", 36))
    sponge_strength = float(hierarchy.get("sponge_strength", 3.0))

    layers = []
    for i, entry in enumerate(_require(raw.get("medium", {}), "layers", "medium")):
        layers.append(LayerSpec(
            thickness=float(entry["thickness"]) if "thickness" in entry else None,
            rho_bar=float(entry["rho"]), vs_bar=float(entry["vs"]),
            vp_bar=float(entry["vp"]), q_factor=float(entry["q"]),
        ))
    medium = LayeredMedium(layers=tuple(layers))

    unc_raw = raw.get("uncertainty", {})
    unc = UncertaintySpec(
        q=float(unc_raw.get("q", 0.1)), r=float(unc_raw.get("r", 0.1)),
        nu_lb=float(unc_raw.get("nu_lb", 1.64)), nu_ub=float(unc_raw.get("nu_ub", 1.78)),
    )

    src_raw = raw.get("source", {})
    moment_rows = _require(src_raw, "moment", "source")
    moment = ((float(moment_rows[0][0]), float(moment_rows[0][1])),
              (float(moment_rows[1][0]), float(moment_rows[1][1])))
    source = SourceSpec(
        x=float(src_raw.get("x", 0.0)),
        depth=float(_require(src_raw, "depth", "source")),
        moment=moment,
        f0=float(_require(src_raw, "f0", "source")),
        t_center=float(src_raw.get("t_center", 0.0)),
        t_start=float(_require(src_raw, "t_start", "source")),
        horizon=float(_require(src_raw, "horizon", "source")),
    )

    geo_raw = raw.get("geometry", {})
    geometry = Geometry(
        offsets=tuple(float(o) for o in _require(geo_raw, "offsets", "geometry")),
        receiver_depth=float(geo_raw.get("receiver_depth", 0.0)),
        pad_x=float(_require(geo_raw, "pad_x", "geometry")),
        pad_z=float(_require(geo_raw, "pad_z", "geometry")),
    )

    data_raw = raw.get("data", {})
    data_rate = float(_require(data_raw, "rate", "data"))
    sigma_raw = data_raw.get("sigma", "auto")
    data_sigma = None if sigma_raw == "auto" else float(sigma_raw)
    data_fine_level = int(_require(data_raw, "fine_level", "data"))
    data_offsets = tuple(float(o) for o in data_raw.get("offsets", geo_raw["offsets"]))
    data_geometry = Geometry(
        offsets=data_offsets, receiver_depth=geometry.receiver_depth,
        pad_x=geometry.pad_x, pad_z=geometry.pad_z,
    )

    atten_raw = raw.get("attenuation", {})
    attenuation = bool(atten_raw.get("enabled", True))
    n_mechanisms = int(atten_raw.get("mechanisms", 3))
    band = None
    if "band" in atten_raw:
        band = (float(atten_raw["band"][0]), float(atten_raw["band"][1]))

    cfg = RunConfig(
        medium=medium, unc=unc, source=source, geometry=geometry,
        data_geometry=data_geometry,
        h0=h0, dt0=dt0, l_max=l_max, c_cfl=c_cfl,
        sponge_cells=sponge_cells, sponge_strength=sponge_strength,
        attenuation=attenuation, n_mechanisms=n_mechanisms, band=band,
        data_rate=data_rate, data_sigma=data_sigma, data_fine_level=data_fine_level,
        **common,
    )
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg: RunConfig) -> None:
    src = cfg.source
    if not _is_integral((src.horizon - src.t_start) / cfg.dt0):
        raise ConfigError("(horizon - t_start) must be a whole number of coarse steps")
    if not _is_integral(-src.t_start / cfg.dt0):
        raise ConfigError("t = 0 must lie on the coarse time grid")
    if not _is_integral(1.0 / (cfg.data_rate * cfg.dt0)):
        raise ConfigError("dt0 must be commensurate with the observation rate")
    if not _is_integral(cfg.data_rate * src.horizon):
        raise ConfigError("the horizon must hold a whole number of observation intervals")
    if cfg.data_fine_level <= cfg.l_max:
        raise ConfigError("data fine_level must exceed l_max")
    if len(cfg.study.verification_counts) != cfg.l_max + 1:
        raise ConfigError("verification_counts must cover levels 0..l_max")

    vp_ub = cfg.unc.vp_upper_bound(cfg.medium)
    if cfg.dt0 > cfg.c_cfl * cfg.h0 / vp_ub:
        raise ConfigError(
            f"dt0={cfg.dt0} violates the CFL bound {cfg.c_cfl * cfg.h0 / vp_ub:.6g} "
            f"for the largest admissible vp {vp_ub:.1f}"
        )
    needed = required_padding(cfg.medium, cfg.unc, src.horizon, src.f0)
    for geom, name in ((cfg.geometry, "geometry"), (cfg.data_geometry, "data")):
        if geom.pad_x < needed or geom.pad_z < needed:
            raise ConfigError(
                f"[{name}] pads ({geom.pad_x}, {geom.pad_z}) are below the "
                f"no-reflection bound {needed:.0f} m"
            )
