"""Splitting a labelled dataset across clients at three heterogeneity levels."""

from __future__ import annotations

import numpy as np

from ..dataio import Dataset

SCHEMES = ("homogeneous", "mild", "extreme")
_PAIRING_ATTEMPTS = 10_000


class PartitionError(ValueError):
    pass


def _homogeneous(labels: np.ndarray, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    perm = rng.permutation(len(labels))
    return [np.sort(p) for p in np.array_split(perm, n)]


def _mild(labels: np.ndarray, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Each class is cut into n shards: n-2 of 1/n, one of 1/(2n), one of 3/(2n).

    Client ``c mod n`` takes the small shard of class ``c``, client
    ``(c+1) mod n`` the large one, the rest one regular shard each.
    """
    if n < 3:
        raise PartitionError(f"mild partition needs n >= 3, got {n}")
    fractions = np.array([1.0 / n] * (n - 2) + [0.5 / n, 1.5 / n])
    cuts_frac = np.concatenate([[0.0], np.cumsum(fractions)])
    shards: list[list[np.ndarray]] = [[] for _ in range(n)]
    classes = np.unique(labels)
    for c in classes:
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        cuts = np.rint(cuts_frac * len(idx)).astype(int)
        cuts[-1] = len(idx)
        pieces = [idx[cuts[i] : cuts[i + 1]] for i in range(n)]
        small_owner = int(c) % n
        large_owner = (int(c) + 1) % n
        others = [k for k in range(n) if k not in (small_owner, large_owner)]
        for owner, piece in zip(others, pieces[: n - 2]):
            shards[owner].append(piece)
        shards[small_owner].append(pieces[n - 2])
        shards[large_owner].append(pieces[n - 1])
    return [np.sort(np.concatenate(s)) if s else np.array([], dtype=np.int64) for s in shards]


def _modal_label(labels: np.ndarray) -> int:
    vals, counts = np.unique(labels, return_counts=True)
    return int(vals[np.argmax(counts)])


def _extreme(labels: np.ndarray, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Sort by label, cut into 2n contiguous partitions, deal two per client with distinct labels."""
    perm = rng.permutation(len(labels))
    order = perm[np.argsort(labels[perm], kind="stable")]
    parts = np.array_split(order, 2 * n)
    if any(len(p) == 0 for p in parts):
        raise PartitionError(f"too few samples ({len(labels)}) for {2 * n} partitions")
    part_label = np.array([_modal_label(labels[p]) for p in parts])
    for _ in range(_PAIRING_ATTEMPTS):
        deal = rng.permutation(2 * n)
        first, second = deal[0::2], deal[1::2]
        if np.all(part_label[first] != part_label[second]):
            return [np.sort(np.concatenate([parts[a], parts[b]])) for a, b in zip(first, second)]
    raise PartitionError("could not pair partitions so that every client gets two distinct labels")


def partition_data(dataset: Dataset, scheme: str, n: int, seed: int) -> list[np.ndarray]:
    """Per-client index arrays forming a disjoint cover of ``range(len(dataset))``."""
    if n < 1:
        raise PartitionError(f"need at least one client, got n={n}")
    if len(dataset) < n:
        raise PartitionError(f"cannot split {len(dataset)} samples across {n} clients")
    rng = np.random.default_rng(seed)
    if scheme == "homogeneous":
        return _homogeneous(dataset.labels, n, rng)
    if scheme == "mild":
        return _mild(dataset.labels, n, rng)
    if scheme == "extreme":
        return _extreme(dataset.labels, n, rng)
    raise PartitionError(f"unknown partition scheme {scheme!r}; valid schemes: {', '.join(SCHEMES)}")
