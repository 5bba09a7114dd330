"""Labeled lateral-movement dataset toolkit.

The heavy lifting lives in the C++ extension; this package re-exports the
main operations. Structured arguments and results are plain dicts/lists in
the same shape as the on-disk JSON artifacts.
"""

from lmforge._core import (
    build_forest,
    build_schedule_set,
    canonicalize_flow_key,
    default_config,
    label_system_logs,
    parse_pcap,
    run_pipeline,
    validate_attack_input,
)

__all__ = [
    "build_forest",
    "build_schedule_set",
    "canonicalize_flow_key",
    "default_config",
    "label_system_logs",
    "parse_pcap",
    "run_pipeline",
    "validate_attack_input",
]
