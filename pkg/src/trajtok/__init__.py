"""Core library for semantic location tokenization and mobility trajectory modeling.

Subpackage map:

- ``geo_profile``: location semantic profiles, canonical text rendering,
  fallback/imported semantic vectors.
- ``rq_codebook``: residual-quantized autoencoder mapping semantic vectors
  to multi-token discrete location IDs.
- ``token_align``: token-embedding alignment losses and bidirectional
  instruction-pair export.
- ``traj_pipeline``: raw visit logs to canonical trajectory windows.
- ``mobility_stats``: statistical trajectory features, summaries, scenario
  cohort predicates.
- ``eval_metrics``: HR@k, BLEU, TVD, JSD and the generation harness.
- ``reward_edit``: distribution/length rewards, group-relative advantages,
  and the deterministic minimal-edit refinement loop.
- ``cli``: batch command-line surface over the whole pipeline.
"""

__version__ = "0.1.0"

ARTIFACT_FORMAT_VERSION = 1
