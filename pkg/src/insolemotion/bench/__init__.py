"""Metrics, baselines, reports and the ablation harness."""

from .baselines import MLPBaseline, TransformerBaseline, predict_windows
from .experiment import ABLATION_VARIANTS, evaluate_disp, evaluate_pose, run_ablation, sample_windows
from .metrics import (double_integration, drift_run, joint_errors, mpjpe, mpjve, mpjve_legs, mrpe, mrpe_windows,
                      path_length, root_errors, velocity_errors)
from .report import MetricReport, Stat, format_table, pose_report, validate_report, write_report
