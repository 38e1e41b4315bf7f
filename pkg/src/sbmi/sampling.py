"""Seeded sampling of planted instances.

An instance is a hidden label vector X, an undirected simple graph G whose
edges are Bernoulli(p_bar + sqrt(1-t) * delta * X_i X_j), and optionally a
Gaussian side observation y = sqrt(R) * X + z.  Labels, edges, and noise
each draw from an independent substream of the master seed, so the draw
count of one component never shifts another.
"""

import base64
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import ModelParams, ParametrizationError
from .rng import TAG_EDGES, TAG_LABELS, TAG_NOISE, standard_normals, substream


def triu_index(i, j, n):
    """Flat index of pair (i, j), i < j, in row-major upper-triangle order."""
    if not 0 <= i < j < n:
        raise IndexError(f"need 0 <= i < j < n, got ({i}, {j}) with n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=128)
def _pair_rows(n):
    iu, ju = np.triu_indices(n, k=1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


@dataclass
class PlantedInstance:
    labels: np.ndarray            # (n,) floats in {x1, x2}
    edges: np.ndarray             # (n(n-1)/2,) uint8 upper-triangle bits
    t: float
    R: float
    seed: int
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.labels.shape[0]

    def edge(self, i, j):
        return int(self.edges[triu_index(i, j, self.n)])

    def adjacency_matrix(self):
        n = self.n
        a = np.zeros((n, n), dtype=np.uint8)
        iu, ju = _pair_rows(n)
        a[iu, ju] = self.edges
        a[ju, iu] = self.edges
        return a

    def adjacency_bits(self):
        """Per-node adjacency words (n <= 64): bit j of word i set iff edge ij."""
        n = self.n
        if n > 64:
            raise ValueError("adjacency words only available for n <= 64")
        words = np.zeros(n, dtype=np.uint64)
        iu, ju = _pair_rows(n)
        present = self.edges.astype(bool)
        # distinct bits per node, so accumulating adds equals OR-ing
        np.add.at(words, iu[present], np.uint64(1) << ju[present].astype(np.uint64))
        np.add.at(words, ju[present], np.uint64(1) << iu[present].astype(np.uint64))
        return words

    def with_side_channel(self, R):
        """Same quenched (X, z), side channel rebuilt at a new SNR R."""
        if self.z is None:
            raise ValueError("instance carries no noise vector z")
        y = math.sqrt(R) * self.labels + self.z
        return PlantedInstance(labels=self.labels, edges=self.edges,
                               t=self.t, R=float(R), seed=self.seed,
                               y=y, z=self.z)

    def to_record(self):
        spins = np.where(self.labels > 0, 1, -1).astype(int).tolist()
        rec = {
            "n": self.n,
            "spins": spins,
            "edges_b64": base64.b64encode(
                np.packbits(self.edges).tobytes()).decode("ascii"),
            "t": float(self.t),
            "R": float(self.R),
            "seed": int(self.seed),
        }
        if self.y is not None:
            rec["y"] = [float(v) for v in self.y]
        if self.z is not None:
            rec["z"] = [float(v) for v in self.z]
        return rec

    @classmethod
    def from_record(cls, rec, r):
        from .model import Alphabet
        ab = Alphabet.from_r(r)
        n = int(rec["n"])
        spins = np.asarray(rec["spins"])
        labels = np.where(spins > 0, ab.x1, ab.x2)
        m = n * (n - 1) // 2
        raw = np.frombuffer(base64.b64decode(rec["edges_b64"]), dtype=np.uint8)
        edges = np.unpackbits(raw)[:m].astype(np.uint8)
        y = np.asarray(rec["y"], dtype=float) if "y" in rec else None
        z = np.asarray(rec["z"], dtype=float) if "z" in rec else None
        return cls(labels=labels, edges=edges, t=float(rec["t"]),
                   R=float(rec["R"]), seed=int(rec["seed"]), y=y, z=z)


def sample_labels(n, r, seed):
    """n i.i.d. labels: x1 with probability r, else x2."""
    from .model import Alphabet
    ab = Alphabet.from_r(r)
    u = substream(seed, TAG_LABELS).random(n)
    return np.where(u < r, ab.x1, ab.x2)


def sample_graph(labels, params: ModelParams, t, seed):
    """Upper-triangle edge bits of the model interpolated to time t."""
    if not 0.0 <= t <= 1.0:
        raise ParametrizationError(f"t must be in [0, 1], got {t}")
    n = labels.shape[0]
    iu, ju = _pair_rows(n)
    probs = params.p_bar + math.sqrt(1.0 - t) * params.delta \
        * labels[iu] * labels[ju]
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ParametrizationError(
            f"edge probability outside [0, 1] at t={t}: "
            f"range [{probs.min():.6g}, {probs.max():.6g}]")
    u = substream(seed, TAG_EDGES).random(probs.shape[0])
    return (u < probs).astype(np.uint8)


def sample_side_channel(labels, R, seed):
    """Gaussian observations y = sqrt(R) * labels + z, z ~ N(0, 1)."""
    if R < 0.0:
        raise ParametrizationError(f"R must be >= 0, got {R}")
    z = standard_normals(substream(seed, TAG_NOISE), labels.shape[0])
    y = math.sqrt(R) * labels + z
    return y, z


def sample_instance(params: ModelParams, t, R, seed, with_noise=True):
    """Full planted instance at interpolation point (t, R)."""
    labels = sample_labels(params.n, params.r, seed)
    edges = sample_graph(labels, params, t, seed)
    y = z = None
    if with_noise:
        y, z = sample_side_channel(labels, R, seed)
    return PlantedInstance(labels=labels, edges=edges, t=float(t),
                           R=float(R), seed=int(seed), y=y, z=z)
