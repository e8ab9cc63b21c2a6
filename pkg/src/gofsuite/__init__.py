"""Simultaneous goodness-of-fit testing with a simulated min-p adjustment.

Run a battery of classical goodness-of-fit statistics against one null
model, calibrate each by parametric bootstrap, and combine them into a
single "RC" p-value that is uniform under the null no matter how many
tests are enabled.
"""

from .adjust import (
    AdjustmentCurve,
    Histogram,
    NullTable,
    TestReport,
    build_adjustment_curve,
    curve_from_minima,
    per_method_pvalues,
    run_test,
    simulate_null_table,
    spread_out,
)
from .models import (
    AlternativeSpec,
    EstimationError,
    GofError,
    NullModel,
    make_null_model,
    sample_alternative,
)
from .stats import (
    METHOD_ORDER,
    available_methods,
    compute_stat_vector,
)
from .studies import (
    PowerCase,
    StudySpec,
    Type1Case,
    anova_demo,
    power_study,
    summarize,
    type1_study,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustmentCurve",
    "AlternativeSpec",
    "EstimationError",
    "GofError",
    "Histogram",
    "METHOD_ORDER",
    "NullModel",
    "NullTable",
    "PowerCase",
    "StudySpec",
    "TestReport",
    "Type1Case",
    "anova_demo",
    "available_methods",
    "build_adjustment_curve",
    "compute_stat_vector",
    "curve_from_minima",
    "make_null_model",
    "per_method_pvalues",
    "power_study",
    "run_test",
    "sample_alternative",
    "simulate_null_table",
    "spread_out",
    "summarize",
    "type1_study",
]
