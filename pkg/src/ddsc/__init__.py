"""Data-driven structured state-feedback synthesis for continuous-time plants."""

__version__ = "0.1.0"

from .certify import CertificationReport, certify_robust, h2_norm, hinf_norm
from .errors import (
    AssemblyError,
    DdscError,
    DefinitenessError,
    DegenerateDataError,
    DivergenceError,
    EllipsoidUnboundedError,
    ScenarioError,
    StabilityError,
    UnsupportedChannelError,
)
from .lti import (
    CollectConfig,
    DataSet,
    LtiSystem,
    SparsityPattern,
    closed_loop,
    make_mass_spring,
    simulate_collect,
    transfer_matrix,
)
from .scenario import Scenario, parse_scenario, parse_scenario_text, preset_names
from .synthesis import (
    AlgoConfig,
    SynthesisOutcome,
    baseline_xdiag,
    h2_structured,
    h2_unstructured,
    hinf_structured,
    hinf_unstructured,
    stabilize_structured,
    stabilize_unstructured,
)
from .uncertainty import (
    MatrixEllipsoid,
    contains,
    fit_min_ellipsoid,
    point_ellipsoid,
    sample_members,
)

__all__ = [
    "__version__",
    "DdscError",
    "AssemblyError",
    "DefinitenessError",
    "StabilityError",
    "DivergenceError",
    "DegenerateDataError",
    "EllipsoidUnboundedError",
    "ScenarioError",
    "UnsupportedChannelError",
    "LtiSystem",
    "SparsityPattern",
    "DataSet",
    "CollectConfig",
    "make_mass_spring",
    "closed_loop",
    "transfer_matrix",
    "simulate_collect",
    "MatrixEllipsoid",
    "fit_min_ellipsoid",
    "point_ellipsoid",
    "contains",
    "sample_members",
    "AlgoConfig",
    "SynthesisOutcome",
    "stabilize_unstructured",
    "h2_unstructured",
    "hinf_unstructured",
    "stabilize_structured",
    "h2_structured",
    "hinf_structured",
    "baseline_xdiag",
    "CertificationReport",
    "certify_robust",
    "h2_norm",
    "hinf_norm",
    "Scenario",
    "parse_scenario",
    "parse_scenario_text",
    "preset_names",
]
