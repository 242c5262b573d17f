"""Experiment harness: manifests, runners, aggregation, diagnostics.

The report module is imported lazily (it pulls in matplotlib)."""

from .aggregate import SCALES, aggregate, evaluate_checks, load_job_markers
from .diagnose import diagnose, kde_curve, silverman_bandwidth
from .manifest import ESTIMATORS, KINDS, ExperimentManifest, ManifestError, cell_label
from .runner import (
    job_marker,
    resume_experiment,
    run_experiment,
    run_single_job,
    write_json_atomic,
)

__all__ = [
    "ESTIMATORS",
    "ExperimentManifest",
    "KINDS",
    "ManifestError",
    "SCALES",
    "aggregate",
    "cell_label",
    "diagnose",
    "evaluate_checks",
    "job_marker",
    "kde_curve",
    "load_job_markers",
    "resume_experiment",
    "run_experiment",
    "run_single_job",
    "silverman_bandwidth",
    "write_json_atomic",
]
