"""Multi-aspect ordinal severity assessment of song lyrics.

Rates music items on five content aspects (violence, substance use, sex,
consumerism, positivity) at three ordered levels, using a shared recurrent
document encoder with per-aspect heads and a choice of ordinality-aware
training strategies. Pure numpy/scipy; deterministic given seeds.
"""

from .analysis import (AnalysisError, PerturbationRecord, PerturbationReport,
                       correlation_matrix, midranks, perturb_sentences,
                       spearman_rho, spearman_test)
from .baselines import BaselineError, LinearModel, linear_train, majority_predict
from .cache import (CacheError, EmbeddingCache, MarkerSignal, TwinEmbedding,
                    expected_keys, open_cache, synthetic_provider,
                    validate_coverage, write_cache)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .corpus import (ASPECTS, Aspect, AspectRatings, CorpusError, FoldPlan,
                     ItemKind, MusicItem, N_ASPECTS, N_LEVELS, SeverityLevel,
                     Song, corpus_stats, kind_percentages, label_distribution,
                     load_manifest, make_folds, project_rating, write_manifest)
from .featurize import (FeaturizeError, TfidfFeaturizer, avg_wordvec,
                        load_word_vectors, tfidf_fit_transform, tokenize)
from .harness import (CVRun, EvalOutcome, EvalReport, FoldOutcome, HarnessError,
                      TrainConfig, TrainExample, TrainResult, build_examples,
                      build_report, confusion_matrix, cross_level_error_ratio,
                      evaluate_model, fold_split, macro_f1, paired_ttest, run_cv,
                      train_model, write_confusion_csvs)
from .model import (AdamState, BackboneConfig, DocForward, ModelError, ModelParams,
                    adam_step, aspect_attention, backward, encode_document, forward,
                    init_adam, init_params, sigmoid, softmax, zero_grads)
from .ordinal import (OrdinalError, Strategy, binary_decode, binary_targets,
                      expected_level, head_dim, kl_loss, needs_rank_head,
                      predict_distributions, rank_head_forward, rank_targets,
                      ranking_classification_loss, sample_rank_pairs, soften_label,
                      strategy_decode, strategy_loss)
from .synthetic import (MARKER_TOKENS, default_marker_signals, generate_corpus,
                        min_embedding_dim)

__version__ = "0.1.0"
