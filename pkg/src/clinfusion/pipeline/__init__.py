from .metrics import auprc, auroc, f1
from .protocol import (EvalReport, ModelConfig, ProtocolResult, RunResult, Split, bootstrap_eval, evaluate_run,
                       run_protocol, select_run, train_one)
from .tsne import TsneResult, tsne

__all__ = [
    "EvalReport", "ModelConfig", "ProtocolResult", "RunResult", "Split", "TsneResult", "auprc", "auroc",
    "bootstrap_eval", "evaluate_run", "f1", "run_protocol", "select_run", "train_one", "tsne",
]
