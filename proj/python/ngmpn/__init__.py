"""R0 from epidemic Petri nets via the next-generation matrix."""

from ._ngmpn import (
    DivisionByZero,
    DomainError,
    Error,
    Model,
    ModelError,
    NumericError,
    ParseError,
    UnboundSymbol,
    attack_rate_r0,
    builtin,
    builtin_ids,
    load_model,
    ngm_r0,
    parse_model,
    r0,
    simulate,
    sweep,
    validate,
)

__all__ = [
    "DivisionByZero",
    "DomainError",
    "Error",
    "Model",
    "ModelError",
    "NumericError",
    "ParseError",
    "UnboundSymbol",
    "attack_rate_r0",
    "builtin",
    "builtin_ids",
    "load_model",
    "ngm_r0",
    "parse_model",
    "r0",
    "simulate",
    "sweep",
    "validate",
]
