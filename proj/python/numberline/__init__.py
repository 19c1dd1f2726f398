"""Layer-wise numeric structure analysis of activation datasets."""

from numberline._core import (
    ActivationDataset,
    Sample,
    average_ranks,
    classify_beta,
    emit_summary,
    fit_pca,
    fit_pls,
    fit_sri,
    generate,
    letters_value,
    make_group,
    make_prompts,
    quantize_groups,
    read_dataset,
    run_sweep,
    sample_numbers,
    spearman,
    write_dataset,
    write_report_files,
    Error,
    IoError,
    SchemaError,
    DataError,
    RangeError,
    ParseError,
)

__all__ = [
    "ActivationDataset",
    "Sample",
    "average_ranks",
    "classify_beta",
    "emit_summary",
    "fit_pca",
    "fit_pls",
    "fit_sri",
    "generate",
    "letters_value",
    "make_group",
    "make_prompts",
    "quantize_groups",
    "read_dataset",
    "run_sweep",
    "sample_numbers",
    "spearman",
    "write_dataset",
    "write_report_files",
    "Error",
    "IoError",
    "SchemaError",
    "DataError",
    "RangeError",
    "ParseError",
]
