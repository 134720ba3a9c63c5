from .lstm import gate_weights, init_lstm, lstm_backward, lstm_forward, lstm_step
from .networks import (BenchmarkLstm, ConcatLstm, FusionNet, ModelOutput, build_model,
                       concat_inputs, fusion_forward)
from .train import History, TrainConfig, fit

__all__ = [
    "BenchmarkLstm", "ConcatLstm", "FusionNet", "History", "ModelOutput", "TrainConfig",
    "build_model", "concat_inputs", "fit", "fusion_forward", "gate_weights", "init_lstm",
    "lstm_backward", "lstm_forward", "lstm_step",
]
