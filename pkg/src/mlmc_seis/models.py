"""Forward models consumed by the sampling loop.

A model exposes ``draw(key) -> theta`` and ``evaluate(theta, level) ->
(qoi, work_seconds)``; both must be pure so coupled pairs share one draw
and concurrent workers need no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mlmc_seis.data import DataSet
from mlmc_seis.medium import LayeredMedium, MaterialSample, UncertaintySpec, sample_material
from mlmc_seis.qoi import qoi_e, qoi_w
from mlmc_seis.rng import make_rng
from mlmc_seis.sls import SlsCoefficients
from mlmc_seis.solver import Geometry, Level, SourceSpec, simulate
from mlmc_seis.surrogate import SurrogateSpec, surrogate_eval


@dataclass(frozen=True)
class SurrogateModel:
    spec: SurrogateSpec

    def draw(self, key: str) -> np.ndarray:
        return make_rng(key).random(self.spec.dim)

    def evaluate(self, theta: np.ndarray, level: int) -> tuple[float, float]:
        return surrogate_eval(self.spec, theta, level)


@dataclass(frozen=True)
class SolverModel:
    """Wave solve followed by one misfit evaluation against the dataset."""

    medium: LayeredMedium
    unc: UncertaintySpec
    source: SourceSpec
    geometry: Geometry
    h0: float
    dt0: float
    qoi_kind: str
    data: DataSet
    attenuation: bool
    sls_bank: tuple[SlsCoefficients, ...] | None
    c_cfl: float = 0.45
    sponge_cells: int = 36
    sponge_strength: float = 3.0

    def draw(self, key: str) -> MaterialSample:
        return sample_material(self.medium, self.unc, key)

    def evaluate(self, theta: MaterialSample, level: int) -> tuple[float, float]:
        result = simulate(
            self.medium, theta, self.source, self.geometry,
            Level.from_base(self.h0, self.dt0, level),
            attenuation=self.attenuation, sls_bank=self.sls_bank,
            c_cfl=self.c_cfl, sponge_cells=self.sponge_cells,
            sponge_strength=self.sponge_strength,
        )
        if self.qoi_kind == "E":
            q = qoi_e(result.seismograms, self.data)
        elif self.qoi_kind == "W":
            q = qoi_w(result.seismograms, self.data)
        else:
            raise ValueError(f"unknown QoI kind {self.qoi_kind!r}")
        return q, result.work_seconds
