"""Layered Earth model and random draws of its material parameters.

The medium is a stack of homogeneous horizontal layers terminated by a
half-space.  Shear speed and density are drawn uniformly and independently
per layer inside relative intervals around the unperturbed values; the
compressional speed is drawn uniformly conditional on the shear speed so
that the vp/vs ratio stays inside a configured band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mlmc_seis.rng import make_rng


@dataclass(frozen=True)
class LayerSpec:
    """One homogeneous layer.

    thickness is in meters and must be None for the terminal half-space;
    rho_bar, vs_bar, vp_bar are the unperturbed density (kg/m^3) and wave
    speeds (m/s); q_factor is the dimensionless quality factor, never
    randomized.
    """

    thickness: float | None
    rho_bar: float
    vs_bar: float
    vp_bar: float
    q_factor: float

    def __post_init__(self) -> None:
        if self.thickness is not None and not self.thickness > 0:
            raise ValueError(f"layer thickness must be positive, got {self.thickness}")
        for name in ("rho_bar", "vs_bar", "vp_bar", "q_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.vp_bar > self.vs_bar:
            raise ValueError(f"vp_bar={self.vp_bar} must exceed vs_bar={self.vs_bar}")


@dataclass(frozen=True)
class LayeredMedium:
    """Stack of layers; the last one has no thickness and extends to infinity."""

    layers: tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        if len(self.layers) == 0:
            raise ValueError("medium needs at least one layer")
        if self.layers[-1].thickness is not None:
            raise ValueError("terminal layer must have no thickness")
        if any(layer.thickness is None for layer in self.layers[:-1]):
            raise ValueError("only the terminal layer may omit thickness")

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def tops(self) -> np.ndarray:
        """Depth of each layer's top interface, starting at 0."""
        thicknesses = [layer.thickness for layer in self.layers[:-1]]
        return np.concatenate([[0.0], np.cumsum(thicknesses)])

    def layer_index_at(self, z: float) -> int:
        """Index of the layer containing depth z; interfaces belong to the deeper layer."""
        if z < 0:
            raise ValueError(f"depth must be nonnegative, got {z}")
        return int(np.searchsorted(self.tops, z, side="right")) - 1

    @property
    def rho_bar(self) -> np.ndarray:
        return np.array([layer.rho_bar for layer in self.layers])

    @property
    def vs_bar(self) -> np.ndarray:
        return np.array([layer.vs_bar for layer in self.layers])

    @property
    def vp_bar(self) -> np.ndarray:
        return np.array([layer.vp_bar for layer in self.layers])

    @property
    def q_factors(self) -> np.ndarray:
        return np.array([layer.q_factor for layer in self.layers])


@dataclass(frozen=True)
class UncertaintySpec:
    """Relative half-widths of the per-layer parameter ranges.

    q and r scale the vs and rho intervals; [nu_lb, nu_ub] bounds the
    vp/vs ratio of the conditional vp draw.
    """

    q: float
    r: float
    nu_lb: float
    nu_ub: float

    def __post_init__(self) -> None:
        if not 0 <= self.q < 1:
            raise ValueError(f"q must be in [0, 1), got {self.q}")
        if not 0 <= self.r < 1:
            raise ValueError(f"r must be in [0, 1), got {self.r}")
        if not 1 < self.nu_lb <= self.nu_ub:
            raise ValueError(f"need 1 < nu_lb <= nu_ub, got [{self.nu_lb}, {self.nu_ub}]")

    def vp_upper_bound(self, medium: LayeredMedium) -> float:
        """Largest compressional speed any sample from this spec can attain."""
        return float(np.max((1 + self.q) * medium.vs_bar) * self.nu_ub)


@dataclass(frozen=True)
class MaterialSample:
    """One random draw of (rho, vp, vs) for every layer."""

    rho: np.ndarray
    vp: np.ndarray
    vs: np.ndarray

    def __post_init__(self) -> None:
        for name in ("rho", "vp", "vs"):
            arr = getattr(self, name)
            if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                raise ValueError(f"{name} must be finite and strictly positive")
        if not len(self.rho) == len(self.vp) == len(self.vs):
            raise ValueError("per-layer arrays must have equal length")

    @property
    def vp_max(self) -> float:
        return float(np.max(self.vp))


def sample_material(medium: LayeredMedium, unc: UncertaintySpec, key: str) -> MaterialSample:
    """Draw one material sample from the conditional uniform distributions.

    vs_i ~ U[(1-q) vs_bar_i, (1+q) vs_bar_i] and rho_i ~ U[(1-r) rho_bar_i,
    (1+r) rho_bar_i], independent across layers; vp_i ~ U[nu_lb vs_i,
    nu_ub vs_i] conditional on the drawn vs_i.  The same key always yields
    the same sample, bit for bit.
    """
    if not isinstance(medium, LayeredMedium) or len(medium) == 0:
        raise ValueError("medium must be a non-empty LayeredMedium")
    if not isinstance(unc, UncertaintySpec):
        raise ValueError("unc must be an UncertaintySpec")
    rng = make_rng(key)
    n = len(medium)
    # Draw order is part of the determinism contract: vs, then rho, then vp | vs.
    u_vs, u_rho, u_nu = rng.random(n), rng.random(n), rng.random(n)
    vs = medium.vs_bar * (1 - unc.q + 2 * unc.q * u_vs)
    rho = medium.rho_bar * (1 - unc.r + 2 * unc.r * u_rho)
    vp = vs * (unc.nu_lb + (unc.nu_ub - unc.nu_lb) * u_nu)
    return MaterialSample(rho=rho, vp=vp, vs=vs)


def material_at_depth(
    sample: MaterialSample, medium: LayeredMedium, z: float
) -> tuple[float, float, float, float]:
    """(rho, vp, vs, q_factor) of the unique layer containing depth z."""
    i = medium.layer_index_at(z)
    return (
        float(sample.rho[i]),
        float(sample.vp[i]),
        float(sample.vs[i]),
        float(medium.layers[i].q_factor),
    )
