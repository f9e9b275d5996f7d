"""Multilevel Monte Carlo estimation of seismic misfit quantities of interest.

The package couples a level-parameterized 2-D viscoelastic wave solver (or a
closed-form surrogate) with coupled-sample Monte Carlo estimators, a
work/bias/variance calibration step, and a brute-force hierarchy planner.
"""

from mlmc_seis.medium import (
    LayerSpec,
    LayeredMedium,
    MaterialSample,
    UncertaintySpec,
    material_at_depth,
    sample_material,
)
from mlmc_seis.solver import (
    Geometry,
    Level,
    Seismogram,
    SimulationResult,
    SourceSpec,
    gaussian_stf,
    measure_work,
    required_padding,
    simulate,
)
from mlmc_seis.sls import SlsCoefficients, SlsFitError, fit_sls
from mlmc_seis.surrogate import SurrogateSpec, surrogate_eval
from mlmc_seis.qoi import SignedSeries, qoi_e, qoi_w, split_signs, w2_squared
from mlmc_seis.data import DataSet, generate_synthetic
from mlmc_seis.estimators import (
    CorrectionSample,
    SamplePool,
    bootstrap_ci,
    mc_mean,
    mlmc_estimate,
    mlmc_estimator_variance,
    run_samples,
    sample_variance,
)
from mlmc_seis.calibrate import RateModels, model_bias, model_variance, model_work, run_verification
from mlmc_seis.plan import (
    InfeasibleToleranceError,
    Plan,
    mc_optimal_splitting,
    optimal_samples,
    select_hierarchy,
    select_mc,
    tolerance_schedule,
)

__version__ = "0.1.0"
