"""narrator: detection streams in, English sentences out.

The pipeline assembles object tracks from noisy per-frame detection
candidates, classifies the depicted action with per-class hidden Markov
models (including the track-to-role assignment), and renders the result as a
grammatical sentence describing who did what to whom, where, and how.
"""

from .config import Config
from .scene import BoundingBox, Detection, Scene, parse_scene, render_scene
from .tracking import Track, track_scene
from .classifier import ActionModelBank, classify_scene, train_bank
from .nlg import generate_sentence
from .pipeline import describe_scene

__version__ = "0.1.0"

__all__ = [
    "ActionModelBank",
    "BoundingBox",
    "Config",
    "Detection",
    "Scene",
    "Track",
    "classify_scene",
    "describe_scene",
    "generate_sentence",
    "parse_scene",
    "render_scene",
    "track_scene",
    "train_bank",
    "__version__",
]
