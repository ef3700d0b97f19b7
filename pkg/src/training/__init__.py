from .loss import joint_loss, waveform_error
from .optimizer import AdamState, adam_step, clip_grad_norm, global_grad_norm, lr_schedule
from .trainer import EarlyStopping, TrainConfig, TrainResult, train_loop
