"""agentdag: layered multi-agent topologies — a YAML DSL with strict validation,
graph density scoring, turn rewards with group-relative policy math, a
multi-turn episode orchestrator, and corpus quality filtering."""

from .config import (
    AdapterEndpoint,
    ConfigError,
    ExecutorConfig,
    LanguageSpec,
    RunConfig,
    load_config,
)
from .corpus import (
    CorpusFilterConfig,
    CorpusRecord,
    FilterReport,
    RecordOutcome,
    corpus_stats,
    filter_corpus,
    read_corpus,
    write_corpus,
)
from .dsl import (
    AgentSpec,
    CheckResult,
    ErrorClass,
    ErrorLocation,
    Step,
    TopologyDoc,
    TopologyError,
    canonicalize,
    check_topology,
    check_yaml,
    doc_to_mapping,
    extract_yaml_block,
    parse_topology,
    to_yaml,
    validate_logic,
)
from .graph import (
    NODE_CAPS,
    CostEstimate,
    DagNode,
    DensityReport,
    Edge,
    EdgeKind,
    LayeredDag,
    cost_estimate,
    decode_topology,
    density_from_counts,
    density_scores,
    longest_path,
    n_max_nodes,
)
from .orchestrator import (
    AgentMessage,
    CodeBlock,
    EpisodeResult,
    EpisodeRunner,
    Observation,
    Trajectory,
    TurnRecord,
    build_observation,
    extract_code,
    render_history_prompt,
    run_episode,
)
from .problem import ProblemSpec, TestCase, iter_problems, load_problem
from .rewards import (
    EPS_STD,
    EXEC_REWARDS,
    YAML_PENALTIES,
    GrpoBatch,
    RewardBreakdown,
    TrajectoryLogProbs,
    exec_reward,
    graph_reward,
    grpo_advantages,
    grpo_surrogate,
    trajectory_return,
    turn_reward,
    yaml_error_reward,
)
from .roles import DEFAULT_ROLE_POOL, ROLE_PROMPTS
from .verdicts import (
    FAILURE_PRIORITY,
    ExecOutcome,
    TestResult,
    Verdict,
    classify_verdict,
    normalize_output,
    outputs_match,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterEndpoint",
    "AgentMessage",
    "AgentSpec",
    "CheckResult",
    "CodeBlock",
    "ConfigError",
    "CorpusFilterConfig",
    "CorpusRecord",
    "CostEstimate",
    "DagNode",
    "DensityReport",
    "DEFAULT_ROLE_POOL",
    "Edge",
    "EdgeKind",
    "EpisodeResult",
    "EpisodeRunner",
    "ErrorClass",
    "ErrorLocation",
    "ExecOutcome",
    "ExecutorConfig",
    "EPS_STD",
    "EXEC_REWARDS",
    "FAILURE_PRIORITY",
    "FilterReport",
    "GrpoBatch",
    "LanguageSpec",
    "LayeredDag",
    "NODE_CAPS",
    "Observation",
    "ProblemSpec",
    "RecordOutcome",
    "RewardBreakdown",
    "ROLE_PROMPTS",
    "RunConfig",
    "Step",
    "TestCase",
    "TestResult",
    "TopologyDoc",
    "TopologyError",
    "Trajectory",
    "TrajectoryLogProbs",
    "TurnRecord",
    "Verdict",
    "YAML_PENALTIES",
    "build_observation",
    "canonicalize",
    "check_topology",
    "check_yaml",
    "classify_verdict",
    "corpus_stats",
    "cost_estimate",
    "decode_topology",
    "density_from_counts",
    "density_scores",
    "doc_to_mapping",
    "exec_reward",
    "extract_code",
    "extract_yaml_block",
    "filter_corpus",
    "graph_reward",
    "grpo_advantages",
    "grpo_surrogate",
    "iter_problems",
    "load_config",
    "load_problem",
    "longest_path",
    "n_max_nodes",
    "normalize_output",
    "outputs_match",
    "parse_topology",
    "read_corpus",
    "render_history_prompt",
    "run_episode",
    "to_yaml",
    "trajectory_return",
    "turn_reward",
    "validate_logic",
    "write_corpus",
    "yaml_error_reward",
]
