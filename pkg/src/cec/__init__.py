"""Continuous episodic control: a non-parametric kNN memory agent for continuous actions."""
from .agent import AgentConfig, Transition, compute_returns, evaluate, train
from .embedding import Embedder, EmbedderSpec, embed, identity, new_random_projection
from .envs import ENVIRONMENTS, EnvSpec, StepResult, env_factory, make_env, random_baseline
from .errors import ConfigError, ContractViolation, SnapshotFormatError
from .harness import ExperimentConfig, export_value_map, parse_config, run_experiment
from .memory import EpisodicMemory, MemoryEntry, Neighbor, Outcome, UpdateOutcome
from .policy import PolicyParams, select_action_greedy, select_action_train, softmax_probs
from .reports import EvalReport

__version__ = "0.1.0"
