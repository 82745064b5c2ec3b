"""Dual-process video question answering at desk scale."""

from .autodiff import ContractError, ShapeError, Tensor, backward, tensor
from .config import RunConfig, load_config
from .crn import CrnVideo, SubsetPolicy
from .decoders import CountHead, MultiChoiceHead, OpenEndedHead, hinge_loss
from .gradcheck import gradcheck
from .harness import (Adam, MetricsRecord, ablate, build_model,
                      evaluate_checkpoint, evaluate_model, train)
from .language import QuestionEncoder, Vocabulary, tokenize
from .mac import MacReasoner
from .model import VideoQaModel
from .params import ParamStore

__version__ = "0.1.0"

__all__ = [
    "Adam", "ContractError", "CountHead", "CrnVideo", "MacReasoner",
    "MetricsRecord", "MultiChoiceHead", "OpenEndedHead", "ParamStore",
    "QuestionEncoder", "RunConfig", "ShapeError", "SubsetPolicy", "Tensor",
    "VideoQaModel", "Vocabulary", "__version__", "ablate", "backward",
    "build_model", "evaluate_checkpoint", "evaluate_model", "gradcheck",
    "hinge_loss", "load_config", "tensor", "tokenize", "train",
]
