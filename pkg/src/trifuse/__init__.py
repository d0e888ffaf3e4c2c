"""Compact trilinear interaction layers with brute-force oracles, gradients and distillation."""
__version__ = "0.1.0"

from .bilinear import BilinearParams, bilinear_attention, bilinear_forward, bilinear_joint, bilinear_joint_ban_form
from .cti import (AttentionMap, CtiLayerParams, attention_map, cti_forward, joint_representation)
from .distill import DistillConfig, kd_loss, kd_terms, softened_softmax, teacher_student_step
from .errors import ConfigError, DimensionError, DivergenceError, OracleScaleError, TapeError, TrifuseError
from .grad import GradCheckReport, Tape, backward, finite_difference_check
from .oracle import (assemble_full_tensor, expanded_interaction, full_interaction, triplet_interaction,
                     unitary_attention_combine)
from .paralind import (JointEmbeddingFactors, ParalindFactors, count_decomposed_params, count_full_params,
                       decomposition_rate, reconstruct_attention_tensor, reconstruct_joint_tensor)
from .tensor import DenseTensor, ModalityFeatures, devectorize, hadamard, mode_product, superdiagonal_identity, vectorize

