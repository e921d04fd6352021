"""Probe-driven routing of reasoning problems across a model pool.

Train small MLP probes on hidden-state embeddings to predict problem
difficulty or per-model correctness, route each problem to the cheapest
model likely to solve it, and score the routed system by replaying
recorded per-model outcomes.
"""

from .data import (
    EmbeddingStore,
    OutcomeMatrix,
    OutcomeRecord,
    Problem,
    SplitSpec,
    join,
    load_outcomes,
    load_problems,
    read_embedding_store,
    split,
    write_embedding_store,
    write_outcomes,
    write_problems,
)
from .errors import RouteforgeError
from .evaluation import (
    AdvantageMatrix,
    BaselineSegment,
    ReportBundle,
    SystemPoint,
    advantage_matrix,
    baseline_point,
    dominance_report,
    emit_report,
    random_segment,
    simulate,
    simulate_cascade,
    simulate_difficulty,
    simulate_oracle,
    sweep_cascade,
    sweep_difficulty,
)
from .nn import (
    Batch,
    MlpModel,
    TrainConfig,
    derive_seed,
    forward,
    grad_check,
    init_mlp,
    train,
)
from .checkpoint import read_checkpoint, write_checkpoint
from .predictors import (
    CorrectnessPredictor,
    DifficultyPredictor,
    correctness_probs,
    difficulty_scores,
    evaluate_predictor,
    layer_sweep,
    load_predictor,
    predict_correctness,
    predict_difficulty_score,
    save_predictor,
    train_correctness,
    train_difficulty,
)
from .router import (
    ModelPool,
    ModelProfile,
    RoutingDecision,
    load_pool,
    pool_by_mean_latency,
    route_cascade,
    route_difficulty,
    route_oracle,
    route_random,
    write_pool,
)
from .synth import SynthConfig, SynthPool, synth_pool

__version__ = "0.1.0"
