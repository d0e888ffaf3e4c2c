"""Synthetic tasks, models, training and evaluation."""
from .data import DataSpec, Dataset, generate_dataset, generate_splits, read_jsonl, write_jsonl
from .io import load_checkpoint, save_checkpoint
from .metrics import EvalReport, evaluate_predictions, type_means
from .models import BilinearModel, CtiModel, PairConcatModel, model_from_dict
from .train import TrainConfig, TrainResult, evaluate, predict, train
