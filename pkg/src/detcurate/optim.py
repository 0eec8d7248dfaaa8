"""Training numerics: SGD with momentum and weight decay, a reduce-on-
plateau schedule, a fixed 12-epoch schedule with drops at epochs 7 and 10,
and early stopping that restores the best-validation weights.

The update, per step, in this exact order:

    buffer <- mu * buffer + grad + weight_decay * theta
    theta  <- theta - gamma * buffer

with the buffer starting at zero.  Tests pin the iterates bitwise, so the
operation order above is part of the contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Hyper:
    mu: float = 0.9
    weight_decay: float = 0.0
    gamma: float = 0.001

    def __post_init__(self) -> None:
        if not (0.0 <= self.mu < 1.0):
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        if self.gamma <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class OptimizerState:
    theta: np.ndarray
    buffer: np.ndarray
    step_count: int
    hyper: Hyper

    @classmethod
    def init(cls, theta: np.ndarray, hyper: Hyper) -> "OptimizerState":
        theta = np.asarray(theta, dtype=np.float64)
        return cls(theta=theta, buffer=np.zeros_like(theta), step_count=0, hyper=hyper)


def sgd_step(state: OptimizerState, grad: np.ndarray) -> OptimizerState:
    """One momentum/weight-decay step; returns the new state."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.theta.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {state.theta.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    h = state.hyper
    buffer = h.mu * state.buffer + grad + h.weight_decay * state.theta
    theta = state.theta - h.gamma * buffer
    return OptimizerState(theta=theta, buffer=buffer, step_count=state.step_count + 1, hyper=h)


@dataclass
class PlateauSchedule:
    """Scale the rate by `factor` after `patience` epochs without strict
    validation improvement.  Feed it each epoch's validation loss (after
    the epoch); the returned multiplier applies to subsequent updates."""

    factor: float = 0.1
    patience: int = 5
    min_delta: float = 0.0
    multiplier: float = 1.0
    best: float = math.inf
    stale: int = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.multiplier *= self.factor
                self.stale = 0
        return self.multiplier


@dataclass
class OneXSchedule:
    """Fixed schedule: multiplier 1 for epochs 1-6, 0.1 for 7-9, 0.01 for
    10-12.  Asking beyond the total epoch count is an error."""

    total: int = 12
    drops: tuple[int, ...] = (7, 10)
    factor: float = 0.1

    def at(self, epoch: int) -> float:
        if not (1 <= epoch <= self.total):
            raise ValueError(f"epoch {epoch} outside the fixed schedule of {self.total}")
        return self.factor ** sum(1 for d in self.drops if epoch >= d)


@dataclass
class ConstantSchedule:
    def at(self, epoch: int) -> float:
        if epoch < 1:
            raise ValueError("epochs are 1-based")
        return 1.0


def schedule_epoch(sched, epoch: int, val_loss: float | None = None) -> float:
    """Multiplier for the given epoch.  Plateau variants require the
    epoch's validation loss and answer for the updates that follow it;
    fixed variants answer for the epoch itself."""
    if isinstance(sched, PlateauSchedule):
        if val_loss is None:
            raise ValueError("plateau schedule needs a validation loss")
        return sched.step(val_loss)
    return sched.at(epoch)


StopVerdict = str  # "continue" | "stop"


@dataclass
class EarlyStopper:
    """Stop after `patience` epochs without strict improvement (or at
    `max_epochs`), remembering the weights of the best epoch."""

    patience: int = 10
    max_epochs: int = 200
    min_delta: float = 0.0
    best_loss: float = math.inf
    best_epoch: int = 0
    best_weights: np.ndarray | None = None
    stale: int = 0

    def update(self, epoch: int, val_loss: float, weights: np.ndarray) -> StopVerdict:
        if epoch > self.max_epochs:
            raise ValueError(f"epoch {epoch} beyond max_epochs {self.max_epochs}")
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.best_weights = np.array(weights, dtype=np.float64, copy=True)
            self.stale = 0
        else:
            self.stale += 1
        if self.stale >= self.patience or epoch == self.max_epochs:
            return "stop"
        return "continue"


def early_stop_update(es: EarlyStopper, epoch: int, val_loss: float,
                      weights: np.ndarray) -> StopVerdict:
    return es.update(epoch, val_loss, weights)


@dataclass
class TraceLog:
    """Per-epoch training trace, serialized as tab-separated text."""

    rows: list[tuple[int, float, float, float | None, str]] = field(default_factory=list)

    def add(self, epoch: int, gamma: float, train_loss: float,
            val_loss: float | None, action: str) -> None:
        self.rows.append((epoch, gamma, train_loss, val_loss, action))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch\tgamma\ttrain_loss\tval_loss\taction\n")
            for epoch, gamma, train, val, action in self.rows:
                val_s = "" if val is None else repr(val)
                fh.write(f"{epoch}\t{gamma!r}\t{train!r}\t{val_s}\t{action}\n")

    @classmethod
    def load(cls, path: str | Path) -> "TraceLog":
        log = cls()
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("epoch\t"):
                raise ValueError(f"{path}: not a training trace")
            for line in fh:
                epoch, gamma, train, val, action = line.rstrip("\n").split("\t")
                log.add(int(epoch), float(gamma), float(train),
                        float(val) if val else None, action)
        return log


def with_gamma(state: OptimizerState, gamma: float) -> OptimizerState:
    """State with the same iterates but a different learning rate."""
    return replace(state, hyper=replace(state.hyper, gamma=gamma))
