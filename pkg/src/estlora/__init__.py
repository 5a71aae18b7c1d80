"""Training-free LoRA fusion planner.

Given a subject (content) adapter and a style adapter, this package
scores per-layer update energies, combines them with a style
discrepancy prior and a denoising-progress term, and emits a per-step,
per-layer selection schedule plus baked adapter files.
"""

from .adapter_io import (
    AlignedPair,
    LoraAdapter,
    LoraLayer,
    TensorRecord,
    align,
    load_adapter,
    write_adapter,
)
from .energy import (
    LayerEnergyReport,
    delta_energy,
    energy_report,
    frobenius_sq,
    report_digest,
    report_to_json,
    spectral_energy,
    topk_abs_sum,
)
from .errors import (
    AdapterFormatError,
    AlignmentError,
    EmbeddingError,
    EstLoraError,
    GateConfigError,
    InputError,
)
from .gate import (
    STYLE,
    SUBJECT,
    GateConfig,
    MergePlan,
    SelectionSchedule,
    gamma,
    onset_step,
    plan,
    plan_baseline,
    plan_from_energies,
    schedule_from_json,
    schedule_to_csv,
    schedule_to_json,
    select,
)
from .kernels import backend
from .schedule_export import (
    ScheduleStats,
    bake,
    bake_all,
    heatmap_bytes,
    parse_heatmap,
    render_heatmap,
    stats,
)
from .style_discrepancy import (
    DiscrepancyScore,
    EmbeddingVector,
    discrepancy,
    load_embedding,
    make_embedding,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterFormatError",
    "AlignedPair",
    "AlignmentError",
    "DiscrepancyScore",
    "EmbeddingError",
    "EmbeddingVector",
    "EstLoraError",
    "GateConfig",
    "GateConfigError",
    "InputError",
    "LayerEnergyReport",
    "LoraAdapter",
    "LoraLayer",
    "MergePlan",
    "STYLE",
    "SUBJECT",
    "ScheduleStats",
    "SelectionSchedule",
    "TensorRecord",
    "align",
    "backend",
    "bake",
    "bake_all",
    "delta_energy",
    "discrepancy",
    "energy_report",
    "frobenius_sq",
    "gamma",
    "heatmap_bytes",
    "load_adapter",
    "load_embedding",
    "make_embedding",
    "onset_step",
    "parse_heatmap",
    "plan",
    "plan_baseline",
    "plan_from_energies",
    "render_heatmap",
    "report_digest",
    "report_to_json",
    "schedule_from_json",
    "schedule_to_csv",
    "schedule_to_json",
    "select",
    "spectral_energy",
    "stats",
    "topk_abs_sum",
    "write_adapter",
    "__version__",
]
