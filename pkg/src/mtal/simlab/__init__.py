"""Desk-scale multi-task active learning simulations."""
from .corpus import CorpusSpec, SyntheticCorpus, generate_corpus
from .experiment import ALExperimentConfig, ALRunRecord, PoolState, run_al_experiment
from .learner import LearnerConfig, ToyLearner, train_learner
from .metrics import evaluate, geometric_mean, macro_f1, micro_f1, paired_t_test

__all__ = [
    "ALExperimentConfig", "ALRunRecord", "CorpusSpec", "LearnerConfig", "PoolState",
    "SyntheticCorpus", "ToyLearner", "evaluate", "generate_corpus", "geometric_mean",
    "macro_f1", "micro_f1", "paired_t_test", "run_al_experiment", "train_learner",
]
