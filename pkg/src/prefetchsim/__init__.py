"""Trace-driven simulator for segment prefetching in short-form video feeds."""

from .client import ServiceClient, ServiceError
from .engine import SessionResult, simulate_session
from .experiment import (
    ExperimentConfig,
    PolicySetting,
    collect_violations,
    config_from_dict,
    load_experiment_config,
    run_experiment,
)
from .metrics import (
    ComparisonReport,
    relative_reduction,
    report_from_json,
    report_to_csv,
    report_to_json,
)
from .model import Playlist, SessionConfig, SessionMetrics, VideoSpec
from .policies import make_policy
from .traces import (
    ThroughputTrace,
    UserTrace,
    generate_user_trace,
    load_throughput_trace,
    load_user_trace,
    save_user_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ComparisonReport",
    "ExperimentConfig",
    "Playlist",
    "PolicySetting",
    "ServiceClient",
    "ServiceError",
    "SessionConfig",
    "SessionMetrics",
    "SessionResult",
    "ThroughputTrace",
    "UserTrace",
    "VideoSpec",
    "__version__",
    "collect_violations",
    "config_from_dict",
    "generate_user_trace",
    "load_experiment_config",
    "load_throughput_trace",
    "load_user_trace",
    "make_policy",
    "relative_reduction",
    "report_from_json",
    "report_to_csv",
    "report_to_json",
    "run_experiment",
    "save_user_trace",
    "simulate_session",
]
