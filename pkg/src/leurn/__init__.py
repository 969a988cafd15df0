"""Tabular neural networks built from univariate threshold rules.

Every layer quantizes each feature against learned thresholds, so a trained
model is exactly a univariate decision tree over regions: regions can be
extracted, explained additively, sampled from, and compared by embedding
similarity.
"""
from .bundle import ModelBundle, load_bundle, save_bundle
from .data import (PreparedData, Preprocessor, Schema, TabularData,
                   dataset_from_arrays, fit_transform, half_moon, load_csv,
                   split)
from .errors import (BundleError, ConfigError, DataError, LeurnError,
                     ShapeError, TrainingDivergedError)
from .explain import (Contribution, ExplanationReport, ImportanceTable,
                      contributions, feature_importance, feature_selection,
                      merge_redundant, report)
from .hpo import FinalResult, SearchResult, SearchSpec, final_protocol, search
from .model import (ForwardTrace, LeurnConfig, LeurnGrads, LeurnParams,
                    backward, forward, init_params, predict, qtanh)
from .rules import Region, RuleEntry, extract_region, generate, region_output, simplify
from .similarity import (EmbeddingIndex, build_index, confidence, embed,
                         rbf_similarity)
from .train import (TrainConfig, TrainReport, accuracy, auroc, evaluate, fit,
                    predict_batch, rmse)

__version__ = "0.1.0"
