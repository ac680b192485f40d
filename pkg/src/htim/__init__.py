"""Hybrid text + interaction modeling of social-media users.

The package builds per-user feature vectors from two modalities, tweet
text and retweet-graph structure, fuses them by concatenation and trains
an RBF-kernel SVM to infer multi-party political leaning.  Engagement
tiers (member, supporter, sympathizer) are derived from follow edges and
drive either cross-validation or member-to-tier transfer evaluation.
"""

from ._jit import backend_name
from .config import MethodSpec, RunConfig, build_config, parse_method
from .corpus import (DEFAULT_MIN_TOKENS, DEFAULT_QUOTAS, FollowEdge,
                     RegionDataset, RetweetEdge, SynthConfig, Tier, Tweet,
                     UserRecord, apply_tiers, derive_supporters,
                     derive_sympathizers, filter_and_quota, load_region,
                     load_region_dir, save_region, synth_region)
from .errors import (ConfigError, DataError, DataFormatError, HtimError,
                     NumericError)
from .evaluate import (ConfusionMatrix, EvalOutcome, EvalReport, FoldOutcome,
                       kfold_split, macro_f1, macro_f1_pairs, per_class_prf,
                       render_projection_svg, run_cv, run_transfer,
                       write_confusion_csv, write_report_json)
from .fusion import (HybridFeature, feature_matrix, fuse_tweet_level,
                     fuse_user_level, read_hybrid_csv, write_hybrid_csv)
from .graph import (InteractionGraph, WalkConfig, build_graph,
                    generate_walks, train_relational, train_skipgram_walks,
                    train_walk_embeddings, transition_probs)
from .pipeline import (FeatureProvider, build_provider, evaluate_dataset,
                       project_dataset, tier_users, train_graph_table,
                       train_text_model)
from .svm import (KernelConfig, MajorityBaseline, Prediction, RandomBaseline,
                  SvmClassifier, SvmModel, load_model, majority_vote,
                  predict, predict_many, rbf_matrix, save_model, train_svm)
from .text import (TextVector, TfidfModel, Vocabulary, WordEmbeddings,
                   concat_tweet_user, embed_tweet_static, fit_tfidf,
                   load_contextual_tokens, pool_contextual, tokenize,
                   train_cbow, user_text_vector)
from .tsne import Projection2D, tsne_project
from .vectors import (EmbeddingTable, format_float, read_embeddings_text,
                      write_embeddings_text)

__version__ = "0.1.0"

__all__ = [
    "__version__", "backend_name",
    # errors
    "HtimError", "ConfigError", "DataError", "DataFormatError",
    "NumericError",
    # corpus
    "Tier", "Tweet", "UserRecord", "RetweetEdge", "FollowEdge",
    "RegionDataset", "SynthConfig", "DEFAULT_QUOTAS", "DEFAULT_MIN_TOKENS",
    "load_region", "load_region_dir", "save_region", "synth_region",
    "derive_supporters", "derive_sympathizers", "apply_tiers",
    "filter_and_quota",
    # text
    "tokenize", "TextVector", "Vocabulary", "TfidfModel", "fit_tfidf",
    "WordEmbeddings", "train_cbow", "embed_tweet_static",
    "load_contextual_tokens", "pool_contextual", "user_text_vector",
    "concat_tweet_user",
    # graph
    "InteractionGraph", "build_graph", "transition_probs", "WalkConfig",
    "generate_walks", "train_skipgram_walks", "train_walk_embeddings",
    "train_relational",
    # fusion
    "HybridFeature", "fuse_tweet_level", "fuse_user_level",
    "feature_matrix", "write_hybrid_csv", "read_hybrid_csv",
    # svm
    "KernelConfig", "SvmModel", "Prediction", "train_svm", "predict",
    "predict_many", "majority_vote", "rbf_matrix", "MajorityBaseline",
    "RandomBaseline", "SvmClassifier", "save_model", "load_model",
    # evaluation
    "ConfusionMatrix", "per_class_prf", "macro_f1", "macro_f1_pairs",
    "kfold_split", "FoldOutcome", "EvalOutcome", "run_cv", "run_transfer",
    "EvalReport", "write_report_json", "write_confusion_csv",
    "render_projection_svg",
    # projection
    "Projection2D", "tsne_project",
    # vectors
    "EmbeddingTable", "format_float", "read_embeddings_text",
    "write_embeddings_text",
    # config / pipeline
    "MethodSpec", "parse_method", "RunConfig", "build_config",
    "FeatureProvider", "build_provider", "train_text_model",
    "train_graph_table", "tier_users", "evaluate_dataset",
    "project_dataset",
]
