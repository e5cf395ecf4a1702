"""Round-based fine-tuning for unbalanced image datasets.

Rounds are small balanced subsets: the first holds every class, each later
one drops the scheduled classes. Training runs from the last round (fewest
classes) back to the first, carrying the network forward and growing the
output layer as classes are added.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..errors import EmptyRound
from .checkpoint import save_model
from .cnn import CnnModel, cnn_train, rehead

log = logging.getLogger(__name__)


@dataclass
class Round:
    classes: list  # sorted labels present in the round
    indices: np.ndarray  # positions into the full dataset

    @property
    def per_class(self) -> int:
        return len(self.indices) // max(len(self.classes), 1)


def make_rounds(labels, discard_schedule: Sequence = (), seed: int = 0,
                exclude=None) -> list[Round]:
    """Build balanced round datasets in creation order.

    Round 1 covers every class; round r+1 removes ``discard_schedule[r]``
    from the classes of round r. Each class of a round is downsampled,
    by seeded random choice, to the smallest class size of that round.
    ``exclude`` lists dataset positions that must not be used.
    """
    labels = np.asarray(labels)
    pool = np.arange(len(labels))
    if exclude is not None and len(exclude):
        pool = np.setdiff1d(pool, np.asarray(exclude))
    rng = np.random.default_rng(seed)
    remaining = sorted(set(labels[pool].tolist()))
    schedule = [set(d) if not np.isscalar(d) else {d} for d in discard_schedule]

    rounds = []
    for step in range(len(schedule) + 1):
        if step:
            dropped = schedule[step - 1]
            unknown = dropped - set(remaining)
            if unknown:
                raise EmptyRound(f"round {step + 1} discards classes not in round {step}: {sorted(unknown)}")
            remaining = [c for c in remaining if c not in dropped]
        if not remaining:
            raise EmptyRound(f"round {step + 1} has no classes left")
        members = {c: pool[labels[pool] == c] for c in remaining}
        size = min(len(m) for m in members.values())
        if size == 0:
            raise EmptyRound(f"round {step + 1} has an empty class")
        chosen = [np.sort(rng.choice(members[c], size=size, replace=False)) for c in remaining]
        rounds.append(Round(list(remaining), np.concatenate(chosen)))
    return rounds


def smallest_first_schedule(labels, drops: Sequence[int]) -> list[list]:
    """Schedule that discards the smallest remaining classes, ``drops[r]`` at step r."""
    values, counts = np.unique(np.asarray(labels), return_counts=True)
    order = [v.item() for v, _ in sorted(zip(values, counts), key=lambda vc: (vc[1], vc[0]))]
    schedule, pos = [], 0
    for d in drops:
        schedule.append(order[pos:pos + d])
        pos += d
    if pos >= len(order):
        raise EmptyRound("schedule would discard every class")
    return schedule


@dataclass
class RoundParams:
    epochs: int = 1000
    lr: float = 1e-3
    batch_size: int = 32


def fine_tune(images, labels, rounds: Sequence[Round], round_params=None, seed: int = 0,
              c1: int = 16, c2: int = 32, dtype=np.float32,
              on_round_end: Callable[[int, CnnModel], None] | None = None,
              checkpoint_dir=None) -> CnnModel:
    """Train through ``rounds`` in reverse creation order.

    ``round_params`` is one RoundParams (used for all rounds) or a sequence
    aligned with ``rounds`` (creation order). After each training pass
    ``on_round_end(round_number, model)`` is called with the 1-based
    creation-order number of the round just trained, and a checkpoint is
    written to ``checkpoint_dir`` when given.
    """
    if not rounds:
        raise EmptyRound("no rounds to train on")
    if round_params is None:
        round_params = RoundParams()
    if isinstance(round_params, RoundParams):
        round_params = [round_params] * len(rounds)
    if len(round_params) != len(rounds):
        raise ValueError("need one RoundParams per round")
    labels = np.asarray(labels)
    images = np.asarray(images)
    head_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])

    model = None
    for number in range(len(rounds), 0, -1):
        rnd, hp = rounds[number - 1], round_params[number - 1]
        classes = sorted(rnd.classes)
        if model is not None and model.classes != classes:
            model = rehead(model, classes, head_rng)
        y_local = np.searchsorted(classes, labels[rnd.indices])
        log.info("round %d: %d classes x %d samples, %d epochs, lr %g",
                 number, len(classes), rnd.per_class, hp.epochs, hp.lr)
        model = cnn_train(images[rnd.indices], y_local, epochs=hp.epochs, lr=hp.lr,
                          batch_size=hp.batch_size, seed=seed, model=model,
                          n_classes=len(classes), c1=c1, c2=c2, dtype=dtype, min_classes=1)
        if model.classes != classes:
            model.classes = classes
        if on_round_end is not None:
            on_round_end(number, model)
        if checkpoint_dir is not None:
            Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
            save_model(model, Path(checkpoint_dir) / f"round_{number:02d}.npz")
    return model
