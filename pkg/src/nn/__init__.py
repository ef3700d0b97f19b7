from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import (ForwardOutput, ModelConfig, ModelParams, Variant, count_params, forward,
                    forward_frames, init_params, parameter_shapes, utterance_class)
