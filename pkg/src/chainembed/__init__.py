"""Chain-based minor embedding of logical QUBO graphs onto Chimera hardware."""

from .embedding import (
    CleanPath,
    EmbedTimeout,
    Embedding,
    HardwareExhausted,
    ValidationReport,
    Violation,
    embed_with_order,
    node_embedding,
    qubit_gain,
    read_embedding,
    shortest_clean_path,
    state_transition,
    topology_adapting,
    validate,
    write_embedding,
)
from .env import EmbeddingEnv, EnvState, TransitionRecord, action_mask
from .exploration import (
    EmbeddingOrder,
    PotentialScores,
    baseline_order,
    greedy_refine,
    lower_bound,
    oracle_min_qubits,
    order_exploration,
    order_refining,
)
from .graphs import (
    GraphParseError,
    HardwareGraph,
    LogicalGraph,
    generate_ba,
    generate_chimera,
    induced_subgraph,
    load_graph,
    load_hardware,
    save_graph,
)

__version__ = "0.1.0"
