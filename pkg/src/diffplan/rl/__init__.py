from .algos import TrainerConfig, a2c_update, policy_loss_and_grad, ppo_update
from .buffer import RolloutBuffer, compute_gae, gae, normalize
from .network import PolicyValueNet, clip_grad_norm, log_softmax, orthogonal
from .optim import Adam, RMSprop
from .train import (CURVE_HEADER, RolloutWorkers, TrainResult, collect_rollouts, evaluate, load_checkpoint, read_curve,
                    save_checkpoint, success_stats, train, write_curve, write_reward_log)

__all__ = [
    "Adam", "CURVE_HEADER", "PolicyValueNet", "RMSprop", "RolloutBuffer", "RolloutWorkers", "TrainResult", "TrainerConfig",
    "a2c_update", "clip_grad_norm", "collect_rollouts", "compute_gae", "evaluate", "gae", "load_checkpoint",
    "log_softmax", "normalize", "orthogonal", "policy_loss_and_grad", "ppo_update", "read_curve",
    "save_checkpoint", "success_stats", "train", "write_curve", "write_reward_log",
]
