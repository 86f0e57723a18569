"""Evaluation harness: synthetic corpora, metrics, and brute-force oracles.

The harness closes the loop without any real recordings: `synth` fabricates
sessions (IMU, audio, classifier scores, pitch tracks, ground truth) from
compact :class:`SyntheticSpec` descriptions, `metrics` scores detector
output against ground truth, and `oracles` provides deliberately naive
reference implementations (exhaustive DTW alignment, enumerated Viterbi)
used to validate the fast dynamic programs.
"""

from .synth import (
    PLACE_PROFILES,
    PlaceProfile,
    SyntheticSpec,
    GeneratedSession,
    generate_session,
    make_melody,
    make_vocal_corpus,
    make_motion_corpus,
    make_engagement_dataset,
    parse_corpus_spec,
    write_corpus,
)
from .metrics import (
    ClassMetrics,
    EvalReport,
    evaluate,
    loso_folds,
    map_to_motion_domain,
    map_to_vocal_domain,
)
from .oracles import dtw_oracle, viterbi_oracle

__all__ = [
    "PLACE_PROFILES",
    "PlaceProfile",
    "SyntheticSpec",
    "GeneratedSession",
    "generate_session",
    "make_melody",
    "make_vocal_corpus",
    "make_motion_corpus",
    "make_engagement_dataset",
    "parse_corpus_spec",
    "write_corpus",
    "ClassMetrics",
    "EvalReport",
    "evaluate",
    "loso_folds",
    "map_to_motion_domain",
    "map_to_vocal_domain",
    "dtw_oracle",
    "viterbi_oracle",
]
