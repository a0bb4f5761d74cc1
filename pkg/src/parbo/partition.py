"""Design-space partitions: level-set bands, overlapping boxes, variable blocks."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .afopt import BoxDomain, LevelSetRegion, _multistart, latin_hypercube
from .exceptions import ConfigurationError, DegenerateReferenceError, InvalidArgumentError

log = logging.getLogger(__name__)

KINDS = ("levelset", "hyperbox", "variable")
FLAT_TOL = 1e-12


@dataclass(frozen=True)
class PartitionScheme:
    """A list of regions of one kind.

    Attributes
    ----------
    kind : {"levelset", "hyperbox", "variable"}
    regions : list
        ``LevelSetRegion`` bands, ``BoxDomain`` boxes or sorted index tuples.
    thresholds : ndarray or None
        Band edges ``alpha_1 <= ... <= alpha_{K+1}`` for level-set schemes.
        The outermost bands are open-ended so every value of the surrogate
        falls in some band.
    """

    kind: str
    regions: list
    thresholds: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown partition kind {self.kind!r}")
        if len(self.regions) == 0:
            raise InvalidArgumentError("a partition needs at least one region")
        if self.kind == "variable":
            seen = set()
            for block in self.regions:
                if not block:
                    raise ConfigurationError("variable blocks must be nonempty")
                overlap = seen.intersection(block)
                if overlap:
                    raise ConfigurationError(
                        f"variable partitions must be disjoint; index {sorted(overlap)} repeated"
                    )
                seen.update(block)
        if self.kind == "levelset" and self.thresholds is not None:
            t = np.asarray(self.thresholds, dtype=float)
            if t.size != len(self.regions) + 1 or np.any(np.diff(t) < 0):
                raise InvalidArgumentError("thresholds must be nondecreasing, one more than bands")

    @property
    def count(self) -> int:
        return len(self.regions)

    def band_index(self, values) -> np.ndarray:
        """Band of each surrogate value; a value on an edge goes to the lower band."""
        if self.kind != "levelset":
            raise InvalidArgumentError("band_index applies to level-set schemes only")
        inner = np.asarray(self.thresholds, dtype=float)[1:-1]
        return np.searchsorted(inner, np.asarray(values, dtype=float), side="left")

    def box_members(self, X) -> np.ndarray:
        """Boolean ``(K, n)`` membership of points in each box."""
        if self.kind != "hyperbox":
            raise InvalidArgumentError("box_members applies to hyperbox schemes only")
        return np.array([box.contains(X) for box in self.regions])


def _bands(ref_gp, thresholds):
    t = np.asarray(thresholds, dtype=float)
    edges = t.copy()
    edges[0], edges[-1] = -np.inf, np.inf
    return [LevelSetRegion(ref_gp, float(lo), float(hi)) for lo, hi in zip(edges[:-1], edges[1:])]


def surrogate_extrema(ref_gp, domain: BoxDomain, probe_count: int, rng, refine=5):
    """Minimum and maximum of the surrogate mean: probes plus local descent."""
    rng = np.random.default_rng(rng)
    P = latin_hypercube(domain, probe_count, rng)

    def mean(X):
        return np.asarray(ref_gp.predict(X), dtype=float)

    v = mean(P)
    order = np.argsort(v)
    _, lo = _multistart(mean, P[order[:refine]], domain, 200)
    _, neg_hi = _multistart(lambda X: -mean(X), P[order[::-1][:refine]], domain, 200)
    return min(lo, float(v.min())), max(-neg_hi, float(v.max()))


def levelset_uniform(ref_gp, domain: BoxDomain, k_count: int, probe_count: int = 4096, rng=None):
    """``k_count`` bands of equal width between the extrema of the surrogate."""
    if k_count < 1:
        raise InvalidArgumentError("k_count must be at least 1")
    lo, hi = surrogate_extrema(ref_gp, domain, probe_count, rng)
    if k_count > 1 and hi - lo < FLAT_TOL:
        raise DegenerateReferenceError(
            f"reference is flat (range {hi - lo:.3e}); cannot form {k_count} bands"
        )
    thresholds = lo + (hi - lo) * np.arange(k_count + 1) / k_count
    thresholds[-1] = hi
    return PartitionScheme("levelset", _bands(ref_gp, thresholds), thresholds)


def levelset_custom(ref_gp, domain: BoxDomain, thresholds) -> PartitionScheme:
    """Bands with user-chosen edges; infinite outer edges are allowed."""
    t = np.asarray(thresholds, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise InvalidArgumentError("need at least two thresholds")
    if np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("thresholds must be strictly increasing")
    return PartitionScheme("levelset", _bands(ref_gp, t), t)


def hyperboxes(domain: BoxDomain, per_dim_splits: int = 2, overlap: float = 0.0) -> PartitionScheme:
    """Equal tiling with ``per_dim_splits ** d`` boxes, each grown toward the
    domain bounds by the fraction ``overlap`` of the remaining distance."""
    if per_dim_splits < 1:
        raise InvalidArgumentError("per_dim_splits must be at least 1")
    if not 0.0 <= overlap <= 1.0:
        raise InvalidArgumentError("overlap must lie in [0, 1]")
    edges = [np.linspace(lo, hi, per_dim_splits + 1) for lo, hi in zip(domain.lower, domain.upper)]
    boxes = []
    for cell in itertools.product(range(per_dim_splits), repeat=domain.dim):
        lo = np.array([edges[i][c] for i, c in enumerate(cell)])
        hi = np.array([edges[i][c + 1] for i, c in enumerate(cell)])
        lo = lo - overlap * (lo - domain.lower)
        hi = hi + overlap * (domain.upper - hi)
        if overlap == 1.0:
            lo, hi = domain.lower.copy(), domain.upper.copy()
        boxes.append(BoxDomain(lo, hi))
    return PartitionScheme("hyperbox", boxes)


def variable_partitions(length_scales) -> PartitionScheme:
    """Disjoint variable blocks from per-subsystem ARD length scales.

    Parameters
    ----------
    length_scales : array-like, shape (K, d)
        Row ``k`` holds the fitted length scales of subsystem ``k``'s model.

    Notes
    -----
    Importance is the inverse length scale.  Each subsystem first claims its
    most important variable; when two claim the same one it goes to the
    subsystem where it stands out most relative to that subsystem's median
    importance, and the loser moves to its next choice.  Remaining variables
    join the subsystem where their importance is largest.  Exact ties go to
    the lowest subsystem index and are logged.
    """
    L = np.atleast_2d(np.asarray(length_scales, dtype=float))
    if not np.all(L > 0):
        raise InvalidArgumentError("length scales must be positive")
    K, d = L.shape
    if K > d:
        raise ConfigurationError(f"{K} subsystems cannot share {d} variables disjointly")
    imp = 1.0 / L
    rel = imp / np.median(imp, axis=1, keepdims=True)
    owner = np.full(d, -1)
    prefs = [list(np.argsort(-imp[k], kind="stable")) for k in range(K)]
    pending = list(range(K))
    while pending:
        k = pending.pop(0)
        while prefs[k]:
            j = prefs[k].pop(0)
            rival = owner[j]
            if rival < 0:
                owner[j] = k
                break
            if rel[k, j] > rel[rival, j]:
                owner[j] = k
                pending.append(rival)
                break
            if rel[k, j] == rel[rival, j]:
                log.warning("variable %d ties between subsystems %d and %d", j, rival, k)
                if k < rival:
                    owner[j] = k
                    pending.append(rival)
                    break
    for j in np.flatnonzero(owner < 0):
        best = np.flatnonzero(imp[:, j] == imp[:, j].max())
        if best.size > 1:
            log.warning("variable %d has equal importance in subsystems %s; using %d",
                        j, best.tolist(), best[0])
        owner[j] = best[0]
    blocks = [tuple(int(j) for j in np.flatnonzero(owner == k)) for k in range(K)]
    return PartitionScheme("variable", blocks)
