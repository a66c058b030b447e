"""Sequential and batch coincidence tests for uniformity testing.

Discrete distributions are tested with a sequential singleton-count test
that adapts its sample usage to the realized distance from uniform;
Lipschitz-continuous densities on [0, 1] are tested by the adaptive-binning
variant, which refines its discretization every epoch.  A fixed-sample-size
baseline and a reproducible Monte Carlo harness round out the package.
"""

from .adaptive import AbcConfig, AbcTest, abc_plans, abc_predict_exit_epoch, abc_run, abc_schedule
from .batch import BatchConfig, batch_test
from .coincidence import (
    CoincidenceState,
    bin_indices,
    bin_of,
    expected_k1,
    expected_k1_uniform,
    k1_of,
    l1_to_uniform,
)
from .distributions import (
    DiscreteDistribution,
    LipschitzDensity,
    LowerBoundFamilySpec,
    discretize,
    l1_continuous_to_uniform,
    load_fixture,
    lower_bound_spec,
    make_lower_bound_density,
    make_perturbed,
    make_uniform,
    sample_density,
    sample_discrete,
    save_fixture,
)
from .errors import (
    InfeasibleScheduleError,
    StreamExhaustedError,
    TestTerminatedError,
    UniftestError,
)
from .harness import (
    AuditSpec,
    ExperimentReport,
    ExperimentSpec,
    GridSearchSpec,
    TrialRecord,
    audit_error_caps,
    derive_seed,
    grid_search,
    preset,
    run_experiment,
    wilson_interval,
)
from .sequential import (
    EpochPlan,
    SctConfig,
    SctTest,
    Verdict,
    compute_m0,
    sct_plans,
    sct_run,
    sct_schedule,
    sct_validate_regime,
)

__version__ = "0.1.0"
