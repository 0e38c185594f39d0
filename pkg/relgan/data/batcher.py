r"""
Minibatches of the two domains. The batch order of an epoch is a pure function of
`(shuffle_seed, epoch)`: each permutation is drawn from a numpy `PCG64` generator
seeded with `SeedSequence([shuffle_seed, epoch, stream])`, stream 0 for A and
stream 1 for B. Paired batchers use the A permutation for both domains.
"""

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
import torch
from torch import Tensor

from relgan.data.datasets import TranslationDataset
from relgan.errors import DataError


@dataclass(frozen=True)
class Batch:
    a: Tensor
    b: Tensor
    masks: Optional[Tensor]
    indices_a: Tuple[int, ...]
    indices_b: Tuple[int, ...]


def permutation(seed: int, epoch: int, stream: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(epoch), int(stream)])))
    return rng.permutation(n)


class Batcher:
    def __init__(self, dataset: TranslationDataset, batch_size: int, shuffle_seed: int, paired: bool):
        r"""
        Parameters:
            dataset: the images of both domains
            batch_size: images per batch, at most the dataset size
            shuffle_seed: seed of the epoch permutations
            paired: yield aligned `(A_i, B_i)` pairs, or independently shuffled streams
        """
        if batch_size < 1:
            raise ValueError(f"Batch size must be >= 1, provided {batch_size}")
        if paired and not dataset.paired:
            raise DataError("Paired batches requested on an unpaired dataset")
        if batch_size > len(dataset):
            raise DataError(f"Batch size {batch_size} is larger than the dataset ({len(dataset)} samples)")
        self.dataset = dataset
        self.batch_size = batch_size
        self.shuffle_seed = shuffle_seed
        self.paired = paired
        self._cached_epoch = None
        self._cached_permutations = None

    def __len__(self) -> int:
        """Batches per epoch, the last one possibly smaller."""
        return math.ceil(len(self.dataset) / self.batch_size)

    def permutations(self, epoch: int) -> Tuple[np.ndarray, np.ndarray]:
        if self._cached_epoch != epoch:
            self._cached_permutations = self._draw_permutations(epoch)
            self._cached_epoch = epoch
        return self._cached_permutations

    def _draw_permutations(self, epoch: int) -> Tuple[np.ndarray, np.ndarray]:
        n = len(self.dataset)
        perm_a = permutation(self.shuffle_seed, epoch, 0, self.dataset.images_a.shape[0])[:n]
        if self.paired:
            return perm_a, perm_a
        perm_b = permutation(self.shuffle_seed, epoch, 1, self.dataset.images_b.shape[0])[:n]
        return perm_a, perm_b

    def collate(self, indices_a, indices_b) -> Batch:
        ia = torch.as_tensor(np.asarray(indices_a), dtype=torch.long)
        ib = torch.as_tensor(np.asarray(indices_b), dtype=torch.long)
        masks = None if self.dataset.masks is None else self.dataset.masks[ia]
        return Batch(
            a=self.dataset.images_a[ia],
            b=self.dataset.images_b[ib],
            masks=masks,
            indices_a=tuple(int(i) for i in indices_a),
            indices_b=tuple(int(i) for i in indices_b),
        )

    def batch(self, epoch: int, j: int) -> Batch:
        if not 0 <= j < len(self):
            raise IndexError(f"Batch {j} out of range for {len(self)} batches per epoch")
        perm_a, perm_b = self.permutations(epoch)
        window = slice(j * self.batch_size, (j + 1) * self.batch_size)
        return self.collate(perm_a[window], perm_b[window])

    def at_step(self, step: int) -> Batch:
        """The batch consumed by training step `step` (0-based), epochs following each other."""
        epoch, j = divmod(step, len(self))
        return self.batch(epoch, j)

    def epoch(self, epoch: int) -> Iterator[Batch]:
        for j in range(len(self)):
            yield self.batch(epoch, j)

    def __iter__(self) -> Iterator[Batch]:
        return self.epoch(0)
