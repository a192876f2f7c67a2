"""Run configuration: one dataclass holding every result-affecting knob.

Defaults follow the reference hyperparameters: early-stop ratio 0.8,
Adam learning rate 1e-4, hidden width 1024, output width 512, and
smoothing sigma 4.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from .learner import TrainConfig


@dataclass
class RunConfig:
    seed: int = 0
    selection: str = "gradient"  # gradient | random | all
    image_score: str = "max"  # max | mean-topk
    no_discriminative: bool = False
    detach_center: bool = False
    eta: float = 0.8
    learning_rate: float = 1e-4
    batch_size: int = 256
    max_epochs: int = 200
    hidden: int = 1024
    c_f: int = 512
    sigma: float = 4.0
    fewshot_k: tuple[int, ...] = (1, 2, 4, 8, 16)
    fewshot_seeds: int = 5
    folds: int = 5

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            eta=self.eta,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            seed=self.seed,
            hidden=self.hidden,
            c_out=self.c_f,
            detach_center=self.detach_center,
        )

    def fingerprint(self) -> str:
        """Hash of every field that affects results, except the seed itself.

        The seed is reported alongside the fingerprint; two reports with the
        same fingerprint and seed must be identical.
        """
        fields = asdict(self)
        fields.pop("seed")
        fields["fewshot_k"] = list(self.fewshot_k)
        canonical = json.dumps(fields, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
