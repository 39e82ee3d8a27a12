"""Explicit-state epistemic model checker for DC-based protocols."""

import json

from ._core import (
    Error,
    EnablednessError,
    FitnessError,
    KeyGraph,
    ParseError,
    PreconditionError,
    ResourceError,
    Structure,
    bisimulation,
    cli,
    dc_round,
    find_key_completion,
    full_structure,
    initial_world,
    message_structure,
    parse_formula,
    payer_structure,
    sat,
    valid,
    verify_key_completion,
)
from ._core import check_implementation as _check_implementation
from ._core import run_program as _run_program


def check_implementation(n, candidate="final", strength="strong", mode="abstract", rounds=0, specs=(), jobs=1,
                         budget=None):
    """Two-phase implementation check; returns the report as a dict."""
    return json.loads(_check_implementation(n, candidate, strength, mode, rounds, list(specs), jobs, budget))


def run_program(text, n=3, jobs=1):
    """Runs a program file; returns (passed, world_counts, checkpoint reports)."""
    passed, counts, report = _run_program(text, n, jobs)
    return passed, counts, json.loads(report)
