"""Zero-day evaluation harness for ML-based network intrusion detection.

Builds leave-one-attack-class-out train/test scenarios from flow-record
datasets, trains built-in classifiers (random forest, MLP), reports the
zero-day detection rate alongside standard metrics, and explains detection
failures through per-feature Wasserstein-distance analysis.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, SchemaError, ZdevalError
from .flowdata import (
    ClassCatalog,
    Column,
    ColumnKind,
    FeatureSchema,
    FlowTable,
    build_catalog,
    infer_schema,
    load_csv,
    summarize,
    write_csv,
)
from .preprocess import (
    FeatureMatrix,
    FittedEncoder,
    FittedScaler,
    apply_encoder,
    apply_scaler,
    drop_identifiers,
    fit_encoder,
    fit_scaler,
    preprocess_pipeline,
    to_matrix,
)
from .zslsplit import (
    FoldPlan,
    KnownAttackScenario,
    ZeroDayScenario,
    make_fold_plan,
    make_known_scenarios,
    make_zero_day_scenarios,
)
from .classifiers import (
    ForestConfig,
    MlpConfig,
    MlpModel,
    RandomForestModel,
    forest_score,
    gini,
    mlp_forward,
    mlp_init,
    mlp_score,
    mlp_train,
    predict,
    train_forest,
    train_tree,
)
from .metrics import (
    ConfusionCounts,
    MetricsReport,
    aggregate_folds,
    auc,
    basic_metrics,
    confusion,
    per_class_positives,
    scenario_report,
    zdr,
)
from .wdanalysis import WdReport, per_feature_wd, rank_correlation, wasserstein_1d
from .synth import AttackBlob, SyntheticSpec, synthesize_dataset
from .config import ExperimentConfig, apply_overrides, config_from_dict, load_config
from .harness import RunReport, emit_reports, run_experiment, run_wd_analysis
