"""Multi-agent network embedding learning with circumscribed topology access."""

from .agents import AgentView, RunStats, TrainConfig, build_view, run_manela, schedule_next
from .baselines import WalkConfig, random_walk, run_deepwalk, run_rn, update_pairs_per_path
from .embedding import (
    Embedding,
    LearningSchedule,
    apply_update_pair,
    init_embedding,
    learning_rate,
    load_embedding,
    negative_update,
    objective_estimate,
    positive_update,
    save_embedding,
)
from .graph import (
    EdgeSet,
    LabelSet,
    Network,
    degree,
    generate_sbm,
    largest_connected_component,
    parse_edge_list,
    parse_labels,
    remove_random_edges,
)
from .sampler import RatioVector, exact_m_distribution, sample_targets, walk_endpoint_distribution

__version__ = "0.1.0"
