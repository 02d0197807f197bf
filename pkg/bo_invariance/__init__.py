# Copyright 2019 bo-invariance Developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import logging as _logging

# SET UP NULL LOG HANDLER
logger = _logging.getLogger(__name__)
logger.setLevel(_logging.DEBUG)
logger.addHandler(_logging.NullHandler())

from .spectral import (
    TorusGrid,
    SpectralField,
    ComplexField,
    FourierMultiplier,
    SmoothCutoff,
    hilbert,
    smooth_project,
    dirichlet_project,
    sobolev_norm,
    sobolev_norm_sq,
    integrate,
    average,
)
from .gaussian import (
    GaussianSample,
    EnsembleSpec,
    DensityParams,
    sample_mu,
    filtered_sample,
    ensemble,
    alpha_N,
    chi_R,
    density_F,
    density_H,
    density_sharp_F,
    density_sharp_H,
)
from .energies import (
    EnergyBreakdown,
    DerivativeBlocks,
    energy_E0,
    energy_E_half,
    energy_E1,
    energy_E_3half,
    modified_E,
    modified_G,
    dE_dt_formula,
    dG_dt_formula,
)
from .dynamics import (
    Direction,
    FlowConfig,
    Trajectory,
    linear_phase,
    step_truncated,
    evolve,
    reference_flow,
    conservation_report,
)
from .gauge import gauge_operators, apply_gauge_M, apply_gauge_M_inverse, gauge_w
from .wick import MultilinearForm, SumEstimate, Method, wick_moment, expect_pair, l2_norm_exact, l2_norm_mc
from .forms import build_form, cancellation_check, estimate_form_norm
from .sums import constrained_sum, decay_fit, slope_fit
from .checks import CheckStatus, CheckLedger
from .reports import ExperimentReport, emit_report, load_report
from .config import RunConfig, load_config
from .runner import Run, run_experiment
from .version import __version__, version, version_info
from . import exceptions
