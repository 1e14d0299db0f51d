"""Many-field packet classification with decomposed decision trees."""

from ._mfpc import (
    Engine,
    ParseError,
    Ruleset,
    UsageError,
    __version__,
    bench_csv,
    build_engine,
    deserialize_engine,
    diversity_index,
    field_names,
    field_stats,
    generate_synthetic,
    generate_trace,
    load_engine,
    load_ruleset,
    oracle_classify,
    parse_ruleset,
    plan,
    run_cli,
    standard_deviation,
    train,
    variance,
)

__all__ = [
    "Engine",
    "ParseError",
    "Ruleset",
    "UsageError",
    "__version__",
    "bench_csv",
    "build_engine",
    "deserialize_engine",
    "diversity_index",
    "field_names",
    "field_stats",
    "generate_synthetic",
    "generate_trace",
    "load_engine",
    "load_ruleset",
    "oracle_classify",
    "parse_ruleset",
    "plan",
    "run_cli",
    "standard_deviation",
    "train",
    "variance",
]
