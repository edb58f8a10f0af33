"""Scikit-learn style facade over the training loop and the network.

``fit`` runs self-supervised training on a generated dataset directory and
``predict`` maps (fixed, moving, lambda) to a displacement field. The point
of the facade is a familiar surface: constructor parameters are stored
verbatim, ``get_params``/``set_params`` work, and fitted state lives in
trailing-underscore attributes.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .condnet.checkpoint import load_checkpoint
from .condnet.network import ModelConfig, default_config
from .datagen.synth import PairRecord, load_manifest, load_pair, pairs_for_split
from .errors import ConfigError
from .grid.containers import DisplacementField
from .grid.ops import warp
from .metrics.evalmetrics import dice
from .trainer.config import TrainConfig
from .trainer.loop import train
from .validation import as_image_pair, check_dataset_dir, normalize_lambda

import torch


class ConditionalRegistration(BaseEstimator):
    """Deformable registration conditioned on the regularization weight.

    One ``fit`` produces a model usable at any weight in ``lambda_range``;
    ``predict`` takes the weight per call instead of per trained model.
    """

    def __init__(
        self,
        conditioning: str = "cir_dm",
        iterations: int = 2000,
        lr: float = 1e-4,
        lambda_range: tuple = (0.0, 10.0),
        fixed_lambda=None,
        seed: int = 0,
        batch_size: int = 1,
        checkpoint_every: int = 500,
        keep_best: int = 3,
        levels: int = 3,
        blocks_per_level: int = 5,
        conv_filters: int = 28,
        out_dir=None,
    ):
        self.conditioning = conditioning
        self.iterations = iterations
        self.lr = lr
        self.lambda_range = lambda_range
        self.fixed_lambda = fixed_lambda
        self.seed = seed
        self.batch_size = batch_size
        self.checkpoint_every = checkpoint_every
        self.keep_best = keep_best
        self.levels = levels
        self.blocks_per_level = blocks_per_level
        self.conv_filters = conv_filters
        self.out_dir = out_dir

    # -- estimator surface ---------------------------------------------------

    def fit(self, X, y=None):
        """Train on a dataset directory produced by the data generator."""
        dataset_dir = check_dataset_dir(X)
        manifest = load_manifest(dataset_dir)
        dims = len(manifest["spec"]["shape"])

        model_config = default_config(
            conditioning=self.conditioning,
            dims=dims,
            levels=self.levels,
            blocks_per_level=self.blocks_per_level,
            conv_filters=self.conv_filters,
            lambda_range=tuple(self.lambda_range),
            fixed_lambda=self.fixed_lambda,
        )
        train_config = TrainConfig(
            iterations=self.iterations,
            lr=self.lr,
            lambda_range=tuple(self.lambda_range),
            seed=self.seed,
            progressive_fractions=tuple([1.0 / self.levels] * self.levels),
            batch_size=self.batch_size,
            checkpoint_every=self.checkpoint_every,
            keep_best=self.keep_best,
        )

        out_dir = self.out_dir or tempfile.mkdtemp(prefix="condreg_fit_")
        summary = train(train_config, dataset_dir, out_dir, model_config=model_config)
        self.summary_ = summary
        self.train_seconds_ = summary["train_seconds"]
        self.best_checkpoint_ = summary["best_checkpoint"]
        self.model_ = load_checkpoint(self.best_checkpoint_)
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this ConditionalRegistration instance is not fitted yet; "
                "call fit with a dataset directory first"
            )

    def predict(self, X, lam: float = 1.0):
        """Displacement field(s) for pair(s) at one raw weight.

        ``X`` is a PairRecord, a (fixed, moving) tuple, or a list of either;
        a list in gives a list back.
        """
        self._require_fitted()
        lam_norm = normalize_lambda(lam, self.model_.config.lambda_range)
        single = isinstance(X, (PairRecord, tuple)) or (
            isinstance(X, list) and len(X) == 2 and not isinstance(X[0], (PairRecord, tuple, list))
        )
        items = [X] if single else list(X)
        fields = []
        self.model_.eval()
        with torch.no_grad():
            for item in items:
                fixed, moving = as_image_pair(item)
                flow, _ = self.model_(fixed, moving, lambda_norm=lam_norm)
                fields.append(
                    DisplacementField(values=flow.numpy().astype(np.float32))
                )
        return fields[0] if single else fields

    def score(self, X, y=None, lam: float = 1.0) -> float:
        """Mean Dice over labeled records (PairRecords or a dataset directory,
        in which case its test split is used)."""
        self._require_fitted()
        if isinstance(X, (str, Path)):
            dataset_dir = check_dataset_dir(X)
            manifest = load_manifest(dataset_dir)
            entries = pairs_for_split(manifest, "test") or manifest["pairs"]
            records = [load_pair(dataset_dir, e) for e in entries]
        else:
            records = list(X)
        if not records:
            raise ConfigError("score needs at least one record")
        scores = []
        for rec in records:
            if not isinstance(rec, PairRecord):
                raise ConfigError("score needs PairRecords with labels")
            field = self.predict(rec, lam=lam)
            warped = warp(rec.moving_labels, field, mode="nearest")
            scores.append(dice(rec.fixed_labels, warped).mean)
        return float(np.mean(scores))
