from .specs import (LAYER_KINDS, LayerParams, LayerSpec, Network, NetworkSpec,
                    ShapeMismatchError, conv3, flop_count, init_network, linear,
                    maxpool2x2, param_count, param_memory, param_megabytes,
                    param_shapes, relu, roipool, softmax, spec_from_dict,
                    spec_to_dict)
from .engine import (Activations, ActivationError, CROSS_ENTROPY_EPS, Gradients,
                     TrainConfig, TrainingDivergence, backward, backward_batch,
                     cross_entropy, cross_entropy_batch, cross_entropy_grad,
                     forward, forward_batch, gradient_check, learning_rate,
                     sgd_update, smooth_l1, smooth_l1_grad, train_classifier)
from .modelio import ModelFormatError, load_model, load_single, save_model
from .ops import adaptive_maxpool, adaptive_maxpool_backward
