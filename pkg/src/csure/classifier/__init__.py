"""Prototype classifier built on wFM features and C-SURE class means."""
from .data import SignalDataset, generate_psk_dataset, read_dataset_csv, write_dataset_csv
from .model import PrototypeClassifier, TrainConfig, evaluate, train

__all__ = ["PrototypeClassifier", "SignalDataset", "TrainConfig", "evaluate", "generate_psk_dataset",
           "read_dataset_csv", "train", "write_dataset_csv"]
