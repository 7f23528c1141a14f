"""Robust satisfaction of Boolean folded promise CSPs via basic-SDP rounding."""

from .core import (
    Assignment,
    Constraint,
    Instance,
    Literal,
    PcspError,
    Predicate,
    PredicatePair,
    Template,
    brute_force_best,
    make_ham,
    parse_instance,
    satisfied_fraction,
    serialize_instance,
)

__all__ = [
    "Assignment",
    "Constraint",
    "Instance",
    "Literal",
    "PcspError",
    "Predicate",
    "PredicatePair",
    "Template",
    "brute_force_best",
    "make_ham",
    "parse_instance",
    "satisfied_fraction",
    "serialize_instance",
]
