"""DCoT toolkit: templates, metrics, voting and the command line from the C++ core."""

from ._core import (
    EnsembleError,
    ExtractionError,
    classify_pattern,
    extract_choice,
    extract_number,
    macro_f1,
    majority_vote,
    normalize,
    parse_dcot_response,
    render_cot_prompt,
    render_dcot_prompt,
    render_dcot_target,
    run_cli,
    select_best_k,
    squad_scores,
    summarize,
)

__all__ = [
    "EnsembleError",
    "ExtractionError",
    "classify_pattern",
    "extract_choice",
    "extract_number",
    "macro_f1",
    "majority_vote",
    "normalize",
    "parse_dcot_response",
    "render_cot_prompt",
    "render_dcot_prompt",
    "render_dcot_target",
    "run_cli",
    "select_best_k",
    "squad_scores",
    "summarize",
]
