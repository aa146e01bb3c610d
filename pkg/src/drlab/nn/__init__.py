from .adam import AdamState, adam_step
from .losses import (LossResult, clipped_ppo, entropy, huber, kl_to_target, loss, mse,
                     quantile_regression)
from .network import (Dense, Head, Network, NetworkSpec, NoiseDraw, NoisyDense, ReLU,
                      dueling_aggregate, f_scale, log_softmax, mlp_spec)
from .params import ParamStore, load_checkpoint, save_checkpoint
