"""JSON schemas for spec files and for every CLI result."""

from __future__ import annotations

import jsonschema

from .errors import InputError

_num = {"type": "number"}
_bool = {"type": "boolean"}
_vec = {"type": "array", "items": _num}
_coal = {"type": "string", "pattern": r"^\{[0-9,]*\}$"}

GAME = {
    "type": "object",
    "required": ["n", "worth"],
    "properties": {
        "n": {"type": "integer", "minimum": 1, "maximum": 24},
        "players": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "worth": {"type": "object", "additionalProperties": _num},
    },
}

SEQUENCE = {
    "oneOf": [
        {"type": "string", "enum": ["uniform"]},
        {"type": "object", "properties": {"prefix": {"type": "array", "items": _vec},
                                          "cycle": {"type": "array", "items": _vec}},
         "additionalProperties": False},
    ]
}

POLICY = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "required": ["name"], "properties": {"name": {"type": "string"}}},
    ]
}

DYNAMIC = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"type": "string"},
        "params": {"type": "object"},
        "sequence": SEQUENCE,
        "policy": POLICY,
        "description": {"type": "string"},
    },
}

SPEC_FILE = {"oneOf": [GAME, DYNAMIC]}

_history = {"type": "array", "items": {"type": "object", "required": ["coalition", "allocation"],
                                       "properties": {"coalition": _coal, "allocation": _vec}}}
_first = {"oneOf": [{"type": "null"},
                    {"type": "object", "required": ["index", "history", "coalition", "gain"],
                     "properties": {"index": {"type": "integer"}, "history": _history,
                                    "coalition": _coal, "gain": _num,
                                    "deviation_allocation": _vec}}]}

RESULTS = {
    "leastcore": {
        "type": "object",
        "required": ["epsilon_star", "witness", "binding", "core_nonempty"],
        "properties": {"epsilon_star": _num, "witness": _vec, "core_nonempty": _bool,
                       "binding": {"type": "array", "items": _coal}},
    },
    "faircore check": {
        "type": "object",
        "required": ["verdict", "eps", "min_slack", "coalitions", "discounted_average", "efficiency"],
        "properties": {
            "verdict": _bool, "eps": _num, "min_slack": _num, "tail_bound": _num,
            "discounted_average": _vec,
            "coalitions": {"type": "array", "items": {
                "type": "object", "required": ["coalition", "share", "worth", "slack"],
                "properties": {"coalition": _coal, "share": _num, "worth": _num, "slack": _num}}},
            "efficiency": {"type": "object", "required": ["verdict", "achieved", "optimum"],
                           "properties": {"verdict": _bool, "achieved": _num, "optimum": _num,
                                          "error": _num}},
        },
    },
    "faircore certificate": {
        "type": "object",
        "required": ["found", "certificate"],
        "properties": {
            "found": _bool,
            "gamma": {"type": ["number", "null"]},
            "certificate": {"oneOf": [{"type": "null"}, {
                "type": "object", "required": ["x", "split", "game"],
                "properties": {"x": _vec, "game": GAME,
                               "split": {"type": "object", "required": ["points", "weights"],
                                         "properties": {"points": {"type": "array", "items": _vec},
                                                        "weights": _vec}}}}]},
        },
    },
    "faircore synthesize": {
        "type": "object",
        "required": ["certificate", "sequence", "check"],
        "properties": {"certificate": {"type": "object"}, "sequence": {"type": "array", "items": _vec},
                       "check": {"type": "object", "required": ["verdict"]}},
    },
    "stablecore check": {
        "type": "object",
        "required": ["verdict", "eps", "min_slack", "worst", "coalitions", "slack"],
        "properties": {"verdict": _bool, "eps": _num, "min_slack": _num, "tolerance": _num,
                       "worst": {"type": "object", "required": ["coalition", "h"]},
                       "coalitions": {"type": "array", "items": _coal},
                       "slack": {"type": "array", "items": _vec}},
    },
    "stablecore uxgame": {
        "type": "object",
        "required": ["x", "game", "epsilon_star"],
        "properties": {"x": _vec, "game": GAME, "epsilon_star": _num,
                       "fixed_points": {"type": "array", "items": {"type": "object"}}},
    },
    "stablecore theorem2": {
        "type": "object",
        "required": ["eps", "A", "B", "consistent", "a_gap", "b_slack"],
        "properties": {"eps": _num, "A": _bool, "B": _bool, "consistent": _bool, "a_gap": _num,
                       "b_slack": _num, "a_witness": _vec, "b_cycle": {"type": "array", "items": _vec},
                       "b_confirmed": _bool, "scale": _num},
    },
    "stablecore constworth": {
        "type": "object",
        "required": ["verdict", "epsilon_star", "eps", "optimal_game"],
        "properties": {"verdict": _bool, "epsilon_star": _num, "eps": _num, "witness": _vec,
                       "optimal_game": GAME},
    },
    "credible check": {
        "type": "object",
        "required": ["verdict", "eps", "explored", "counterexample"],
        "properties": {"verdict": _bool, "eps": _num, "explored": {"type": "integer"}, "worst_slack": _num,
                       "tolerance": _num,
                       "counterexample": {"oneOf": [{"type": "null"}, {
                           "type": "object", "required": ["history", "coalition", "h", "slack"],
                           "properties": {"history": _history, "coalition": _coal,
                                          "h": {"type": "integer"}, "slack": _num}}]}},
    },
    "credible onedev": {
        "type": "object",
        "required": ["history", "coalition", "gain", "deviation_allocation", "profitable"],
        "properties": {"history": _history, "coalition": _coal, "gain": _num,
                       "deviation_allocation": _vec, "profitable": _bool, "eps": _num},
    },
    "credible theorem3": {
        "type": "object",
        "required": ["A_profitable", "B_profitable", "agree", "a_first", "b_first"],
        "properties": {"eps": _num, "stages": {"type": "integer"}, "A_profitable": _bool,
                       "B_profitable": _bool, "agree": _bool, "same_first": _bool,
                       "a_max_gain": _num, "b_max_gain": _num, "a_first": _first, "b_first": _first,
                       "explored": {"type": "integer"}},
    },
    "simulate": {
        "type": "object",
        "required": ["coalitions", "allocations", "worths"],
        "properties": {"coalitions": {"type": "array", "items": _coal},
                       "allocations": {"type": "array", "items": _vec},
                       "worths": {"type": "array", "items": _num}},
    },
    "reproduce": {
        "type": "object",
        "required": ["passed", "examples"],
        "properties": {"passed": _bool, "examples": {"type": "array", "items": {
            "type": "object", "required": ["name", "passed", "detail"],
            "properties": {"name": {"type": "string"}, "passed": _bool, "detail": {"type": "string"}}}}},
    },
}


def validate(instance, schema) -> None:
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"schema violation at {path}: {exc.message}") from None


def validate_result(command: str, instance) -> None:
    validate(instance, RESULTS[command])


def validate_spec_file(instance) -> None:
    validate(instance, SPEC_FILE)


__all__ = ["DYNAMIC", "GAME", "RESULTS", "SPEC_FILE", "validate", "validate_result", "validate_spec_file"]
