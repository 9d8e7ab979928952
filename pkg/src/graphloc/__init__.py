"""graphloc: localization from embodied dialog over navigation graphs.

A numpy implementation of dialog-conditioned location prediction: a
dual-stream co-attention transformer scoring dialog-node compatibility,
recurrent and graph-convolution baselines, geodesic evaluation metrics,
a staged training harness, and a synthetic-world generator whose episodes
carry machine-checkable ground truth.
"""

from .errors import DataError, GraphlocError, ValidationError
from .navgraph import (NavEdge, NavGraph, NavNode, Pose, centroid_node,
                       geodesic_distance, load_graph, save_graph,
                       single_source_distances, snap_to_node)
from .episodes import (Dialog, Episode, Message, Vocabulary, build_vocab,
                       flatten_dialog, flatten_message, load_corpus, load_vocab,
                       save_corpus, save_vocab, tokenize, truncate_ids)
from .features import (PanoObservation, RegionBox, RegionFeature, SPATIAL_DIM,
                       encode_region_spatial, grid_boxes, load_features,
                       save_features)
from .synthworld import (AMBIGUOUS, NodeAttributes, SynthEnvironment, WorldSpec,
                         build_codebook, generate_caption, generate_environment,
                         generate_episode, oracle_locate)
from .ledbert import (LedBertConfig, PairRepresentation, alignment_loss,
                      co_attention, embed_inputs, forward, init_params,
                      localization_loss, mlm_loss, predict, score_environment,
                      score_pair, select_mask_positions)
from .baselines import (BASELINE_KINDS, BaselineConfig, attention_predict,
                        baseline_loss, center_baseline, edge_attributes,
                        encode_dialog, gcn_predict, history_attention_predict,
                        init_baseline_params, late_fusion_predict,
                        random_baseline)
from .checkpoint import (Checkpoint, apply_checkpoint, load_checkpoint,
                         save_checkpoint)
from .layers import ParamSet
from .optim import SgdConfig, SgdOptimizer
from .harness import (Dataset, DatasetSpec, EvalReport, SplitMetrics,
                      TrainConfig, evaluate, generate_dataset, load_dataset,
                      load_model, merge_reports, model_predict, parse_csv_report,
                      render_report, run_stage)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
