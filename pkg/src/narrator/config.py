"""Runtime configuration: every tunable in the pipeline, with defaults.

Precedence is defaults < config file < command-line overrides.  The config
file is flat ``key = value`` text; booleans are given as true/false.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import NarratorError


@dataclass
class Config:
    # scene / detection stream
    per_frame_cap: int = 12          # max detection candidates per class per frame
    fps: float = 30.0                # default frame rate for generated scenes

    # tracker
    projection_depth: int = 5        # frames each detection is projected forward
    projection_decay: float = 0.9    # per-frame score decay of projected copies
    lambda_motion: float = 1.0       # weight on the flow-prediction penalty
    min_overlap: float = 0.0         # reserved candidate-gating knob
    min_track_len: int = 10          # discard shorter spans
    otsu_bins: int = 50              # histogram bins for the score offset
    otsu_margin: float = 0.4         # offset = min(otsu, trained + margin)
    prune_var_max: float = 1.0       # score-variance pruning bound (normalized units)
    prune_hist_bins: int = 20        # modality-test histogram bins
    prune_mode_min_frac: float = 0.25  # peaks below this fraction of the tallest
                                       # smoothed bin do not count as modes
    prune_valley_frac: float = 0.5   # peaks merge unless the valley between
                                     # them drops below this fraction of the
                                     # lower peak
    smooth_window: int = 5           # centered moving-average window (odd)

    # posture codebook
    codebook_k: int = 49
    codebook_seed: int = 0
    max_parts: int = 8               # pose vector capacity (part pairs)

    # HMMs
    n_states: int = 5                # desk-scale default; production banks use more
    em_max_iters: int = 30
    em_tol: float = 1e-3
    var_floor: float = 1e-4
    kappa_cap: float = 500.0
    pseudo_count: float = 0.01       # discrete-output smoothing in the M-step
    max_roots: int = 4               # cardinality of the root-filter feature

    # classifier
    role_search_cap: int = 6
    decision_quantile: float = 0.1   # training-likelihood quantile for thresholds
    v1_fraction: float = 0.5         # v1 as a fraction of the lower speed tercile
    ablation: str = "full"           # full | exp1 | exp2 | exp3

    # sentence generation
    color_sat_min: float = 0.7
    color_black_v: float = 0.2
    color_white_v: float = 0.8
    hue_bin_deg: float = 60.0
    aspect_low_factor: float = 0.7
    aspect_high_factor: float = 1.3
    size_score_var_max: float = 0.5  # stability gate for size/shape adjectives
    size_aspect_var_max: float = 0.05
    quadrant_boundary_deg: float = 45.0
    pose_coverage_min: float = 0.5   # part coverage needed for a pose adjective
    top_k: int = 3

    # reproducibility / execution
    seed: int = 0
    jobs: int = 1

    def override(self, key: str, raw: str) -> None:
        if not hasattr(self, key):
            raise NarratorError(f"unknown config key: {key}")
        current = getattr(self, key)
        try:
            if isinstance(current, bool):
                value: object = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            else:
                value = raw
        except ValueError:
            raise NarratorError(f"bad value for {key}: {raw!r}") from None
        setattr(self, key, value)


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> Config:
    """Build a Config from defaults, an optional file, and key=value overrides."""
    cfg = Config()
    if path is not None:
        text = Path(path).read_text()
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise NarratorError(f"{path}:{line_no}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg.override(key, value)
    for item in overrides or []:
        if "=" not in item:
            raise NarratorError(f"override must look like key=value: {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        cfg.override(key, value)
    return cfg


def describe_config() -> str:
    """One line per key with its default, for --help-config."""
    lines = []
    for f in dataclasses.fields(Config):
        lines.append(f"{f.name} = {f.default}")
    return "\n".join(lines)
