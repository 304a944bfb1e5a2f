"""Lifting-one-coefficient-at-a-time transform on line-graph vertices.

Each stage removes the new vertex with the smallest integral, predicts its
value from its neighbours, updates neighbour integrals and coefficients
with a minimum-norm filter, and relinks the neighbourhood so the structure
stays connected.  The per-stage archive makes the transform exactly
invertible and lets the whole linear map be replayed on arbitrary inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .graph import (
    GraphError,
    Id,
    LineGraph,
    MetricMode,
    is_connected,
    minimum_spanning_tree,
    shortest_path_distance,
)

SUM_TOL = 1e-12
#: floor on inter-vertex distances, as a fraction of the coordinate bounding
#: box diagonal; keeps inverse-distance weights finite for duplicate stations
DISTANCE_FLOOR_FRAC = 1e-9


class LiftingError(ValueError):
    """Invalid lifting configuration or state."""


class IntegralScheme(str, Enum):
    SUM = "sum"
    AVERAGE = "average"
    DELTA = "delta"


class PredictionScheme(str, Enum):
    INVERSE_DISTANCE = "inverse_distance"
    MOVING_AVERAGE = "moving_average"


_INTEGRAL_CODE = {"S": IntegralScheme.SUM, "A": IntegralScheme.AVERAGE, "D": IntegralScheme.DELTA}
_PREDICT_CODE = {"id": PredictionScheme.INVERSE_DISTANCE, "nw": PredictionScheme.MOVING_AVERAGE}
_METRIC_CODE = {"c": MetricMode.COORDINATE, "p": MetricMode.PATH_LENGTH}

#: the twelve supported variant acronyms, e.g. "LG-Aid-c"
VARIANTS = tuple(
    f"LG-{i}{p}-{m}" for i in "SAD" for p in ("id", "nw") for m in ("c", "p")
)


@dataclass(frozen=True)
class LiftingConfig:
    """Scheme choices plus stopping time and tie-break seed."""

    integral_scheme: IntegralScheme = IntegralScheme.AVERAGE
    prediction_scheme: PredictionScheme = PredictionScheme.INVERSE_DISTANCE
    metric_mode: MetricMode = MetricMode.COORDINATE
    tau: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.tau < 2:
            raise LiftingError(f"stopping time must be at least 2, got {self.tau}")

    @classmethod
    def from_acronym(cls, acronym: str, tau: int = 2, rng_seed: int = 0) -> "LiftingConfig":
        try:
            body = acronym.removeprefix("LG-")
            integral, metric = body[0], body[-1]
            predict = body[1:-2]
            return cls(
                integral_scheme=_INTEGRAL_CODE[integral],
                prediction_scheme=_PREDICT_CODE[predict],
                metric_mode=_METRIC_CODE[metric],
                tau=tau,
                rng_seed=rng_seed,
            )
        except (KeyError, IndexError):
            raise LiftingError(
                f"unknown variant acronym {acronym!r}; options: {', '.join(VARIANTS)}"
            ) from None

    @property
    def acronym(self) -> str:
        icode = {v: k for k, v in _INTEGRAL_CODE.items()}[self.integral_scheme]
        pcode = {v: k for k, v in _PREDICT_CODE.items()}[self.prediction_scheme]
        mcode = {v: k for k, v in _METRIC_CODE.items()}[self.metric_mode]
        return f"LG-{icode}{pcode}-{mcode}"

    def to_dict(self) -> dict:
        return {
            "integral_scheme": self.integral_scheme.value,
            "prediction_scheme": self.prediction_scheme.value,
            "metric_mode": self.metric_mode.value,
            "tau": self.tau,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LiftingConfig":
        return cls(
            integral_scheme=IntegralScheme(d["integral_scheme"]),
            prediction_scheme=PredictionScheme(d["prediction_scheme"]),
            metric_mode=MetricMode(d["metric_mode"]),
            tau=int(d["tau"]),
            rng_seed=int(d["rng_seed"]),
        )


@dataclass(frozen=True)
class LiftingStage:
    """Archive of one removal: everything needed to undo or replay it."""

    stage: int                       # m, m-1, ..., tau+1
    removed: Id
    neighbors: Tuple[Id, ...]
    a: Tuple[float, ...]             # prediction filter, per neighbor
    b: Tuple[float, ...]             # update filter, per neighbor
    integral: float                  # removed vertex's integral = scale value
    edges_added: Tuple[Tuple[Id, Id, float], ...]   # relink edges (with distance)
    edges_removed: Tuple[Tuple[Id, Id], ...]        # incident edges deleted


@dataclass(frozen=True)
class LiftingRecord:
    """Ordered stage archive from stage m down to stage tau+1."""

    stages: Tuple[LiftingStage, ...]
    initial_integrals: Dict[Id, float]
    final_integrals: Dict[Id, float]
    surviving: Tuple[Id, ...]
    config: LiftingConfig
    ids: Tuple[Id, ...]

    @property
    def removal_order(self) -> Tuple[Id, ...]:
        return tuple(st.removed for st in self.stages)

    def update_filter_fraction_below_half(self) -> float:
        """Fraction of update-filter entries b <= 1/2 (stability diagnostic)."""
        entries = [b for st in self.stages for b in st.b]
        if not entries:
            return 1.0
        return sum(1 for b in entries if b <= 0.5) / len(entries)


@dataclass
class CoefficientSet:
    """Details plus surviving scaling coefficients, scales and levels."""

    details: Dict[Id, float]
    scaling: Dict[Id, float]
    scales: Dict[Id, float]
    levels: Optional[Dict[Id, int]] = None

    def as_vector(self, record: LiftingRecord) -> np.ndarray:
        """Coefficients in canonical order: details in removal order, then
        scaling ids ascending by line-graph position."""
        idx = {k: i for i, k in enumerate(record.ids)}
        vals = [self.details[k] for k in record.removal_order]
        vals += [self.scaling[k] for k in sorted(record.surviving, key=idx.__getitem__)]
        return np.asarray(vals, dtype=float)


def init_integrals(
    lg: LineGraph, scheme: IntegralScheme, metric_mode: MetricMode = MetricMode.COORDINATE
) -> Dict[Id, float]:
    """Initial integral per new vertex.

    Sum: total distance to neighbours.  Average: that total divided by
    twice the neighbourhood size.  Delta: a vector of ones.
    """
    for k in lg.ids:
        if lg.degree(k) == 0:
            raise GraphError(f"degenerate line graph: isolated new vertex {k!r}")
    if scheme is IntegralScheme.DELTA:
        return {k: 1.0 for k in lg.ids}
    out = {}
    for k in lg.ids:
        total = sum(lg.distance(k, s, metric_mode) for s in lg.adjacency[k])
        if scheme is IntegralScheme.SUM:
            out[k] = total
        else:
            out[k] = total / (2.0 * lg.degree(k))
    return out


def predict_weights(distances: Sequence[float], scheme: PredictionScheme) -> List[float]:
    """Nonnegative prediction weights summing to one.

    Inverse-distance weights are proportional to 1/dist; moving average is
    uniform over the neighbourhood.
    """
    if not distances:
        raise LiftingError("prediction requires at least one neighbor")
    if scheme is PredictionScheme.MOVING_AVERAGE:
        return [1.0 / len(distances)] * len(distances)
    for d in distances:
        if not d > 0:
            raise LiftingError(f"degenerate distance {d} in inverse-distance weights")
    inv = [1.0 / d for d in distances]
    total = sum(inv)
    return [w / total for w in inv]


class _Metric:
    """Working metric over the evolving line-graph structure."""

    def floor(self) -> float:
        return 0.0

    def pair_distance(self, k: Id, l: Id) -> float:
        raise NotImplementedError

    def mutual_distances(self, nodes: Sequence[Id], adjacency, edge_dist) -> Dict:
        raise NotImplementedError


class _CoordinateMetric(_Metric):
    def __init__(self, coords: Dict[Id, Tuple[float, float]]):
        self.coords = coords
        xs = [c[0] for c in coords.values()]
        ys = [c[1] for c in coords.values()]
        diag = math.hypot(max(xs) - min(xs), max(ys) - min(ys))
        self._floor = DISTANCE_FLOOR_FRAC * diag if diag > 0 else DISTANCE_FLOOR_FRAC

    def pair_distance(self, k, l):
        return max(math.dist(self.coords[k], self.coords[l]), self._floor)

    def mutual_distances(self, nodes, adjacency, edge_dist):
        return {
            frozenset((a, b)): self.pair_distance(a, b)
            for i, a in enumerate(nodes)
            for b in nodes[i + 1 :]
        }


class _PathMetric(_Metric):
    """Path-length metric; relink freezes link-time shortest-path values."""

    def pair_distance(self, k, l):
        raise LiftingError("path metric defined only on current edges")

    def mutual_distances(self, nodes, adjacency, edge_dist):
        out = {}
        for i, a in enumerate(nodes):
            dists = shortest_path_distance(adjacency, edge_dist, a)
            for b in nodes[i + 1 :]:
                if b not in dists:
                    raise GraphError(f"disconnected in metric: {a!r} and {b!r}")
                out[frozenset((a, b))] = dists[b]
        return out


class _Lifter:
    """Mutable transform state: adjacency, per-edge distances, integrals."""

    def __init__(self, lg: LineGraph, config: LiftingConfig,
                 initial_integrals: Optional[Mapping[Id, float]] = None):
        if not (config.tau < lg.m):
            raise LiftingError(f"stopping time {config.tau} must be below m={lg.m}")
        if not is_connected(lg.ids, [tuple(p) for p in lg.edges()]):
            raise GraphError("line graph disconnected")
        self.lg = lg
        self.config = config
        self.adjacency: Dict[Id, Set[Id]] = {k: set(v) for k, v in lg.adjacency.items()}
        if config.metric_mode is MetricMode.COORDINATE:
            if lg.coords is None:
                raise GraphError("metric inputs unavailable: missing coordinates")
            self.metric: _Metric = _CoordinateMetric(lg.coords)
            self.edge_dist = {
                pair: self.metric.pair_distance(*tuple(pair)) for pair in lg.edges()
            }
        else:
            self.metric = _PathMetric()
            self.edge_dist = lg.base_distances()
        if initial_integrals is None:
            self.integrals = _integrals_from_state(
                self.adjacency, self.edge_dist, config.integral_scheme
            )
        else:
            self.integrals = {k: float(initial_integrals[k]) for k in lg.ids}
        for k, I in self.integrals.items():
            if not I > 0:
                raise LiftingError(f"non-positive initial integral at {k!r}")
        self.active: Set[Id] = set(lg.ids)
        self.rng = np.random.default_rng(config.rng_seed)

    def choose_next(self) -> Id:
        live = [(k, self.integrals[k]) for k in self.active]
        imin = min(I for _, I in live)
        candidates = sorted(
            (k for k, I in live if I == imin), key=self.lg.index.__getitem__
        )
        if len(candidates) == 1:
            return candidates[0]
        return candidates[self.rng.integers(len(candidates))]

    def lift_stage(self, coeffs: Dict[Id, float], k: Id, stage: int) -> Tuple[float, LiftingStage]:
        neighbors = sorted(self.adjacency[k], key=self.lg.index.__getitem__)
        if not neighbors:
            raise LiftingError(f"isolated vertex {k!r} at stage {stage}")
        dists = [self.edge_dist[frozenset((k, s))] for s in neighbors]
        a = predict_weights(dists, self.config.prediction_scheme)

        detail = coeffs[k] - sum(w * coeffs[s] for w, s in zip(a, neighbors))

        Ik = self.integrals[k]
        for w, s in zip(a, neighbors):
            self.integrals[s] += w * Ik
        denom = sum(self.integrals[s] ** 2 for s in neighbors)
        b = [self.integrals[s] * Ik / denom for s in neighbors]
        for w, s in zip(b, neighbors):
            coeffs[s] += w * detail

        edges_removed = tuple((k, s) for s in neighbors)
        plan = self._relink_plan(k, neighbors)
        self._remove_vertex(k)
        edges_added = self._apply_relink(neighbors, plan)

        return detail, LiftingStage(
            stage=stage,
            removed=k,
            neighbors=tuple(neighbors),
            a=tuple(a),
            b=tuple(b),
            integral=Ik,
            edges_added=edges_added,
            edges_removed=edges_removed,
        )

    def _remove_vertex(self, k: Id) -> None:
        for s in self.adjacency[k]:
            self.adjacency[s].discard(k)
            self.edge_dist.pop(frozenset((k, s)), None)
        self.adjacency[k] = set()
        self.active.discard(k)

    def _relink_plan(self, k: Id, neighbors: Sequence[Id]):
        """Pairwise neighbour distances, measured before k is removed.

        Returns None when the induced neighbourhood subgraph is already
        connected.  Path-mode distances may route through k; they are
        frozen at these link-time values, keeping the inverse exact.
        """
        if len(neighbors) < 2:
            return None
        induced = [
            (a, b)
            for i, a in enumerate(neighbors)
            for b in neighbors[i + 1 :]
            if b in self.adjacency[a]
        ]
        if is_connected(neighbors, induced):
            return None
        return self.metric.mutual_distances(list(neighbors), self.adjacency, self.edge_dist)

    def _apply_relink(self, neighbors: Sequence[Id], mutual) -> Tuple[Tuple[Id, Id, float], ...]:
        if mutual is None:
            return ()
        tree = minimum_spanning_tree(
            list(neighbors), [(*tuple(p), w) for p, w in mutual.items()]
        )
        added = []
        for u, v, w in tree:
            if v not in self.adjacency[u]:
                self.adjacency[u].add(v)
                self.adjacency[v].add(u)
                self.edge_dist[frozenset((u, v))] = w
                added.append((u, v, w))
        return tuple(added)


def _integrals_from_state(adjacency, edge_dist, scheme) -> Dict[Id, float]:
    if scheme is IntegralScheme.DELTA:
        return {k: 1.0 for k in adjacency}
    out = {}
    for k, nbrs in adjacency.items():
        if not nbrs:
            raise GraphError(f"degenerate line graph: isolated new vertex {k!r}")
        total = sum(edge_dist[frozenset((k, s))] for s in nbrs)
        out[k] = total if scheme is IntegralScheme.SUM else total / (2.0 * len(nbrs))
    return out


def forward(
    values: Mapping[Id, float],
    lg: LineGraph,
    config: LiftingConfig,
    trajectory: Optional[Sequence[Id]] = None,
    initial_integrals: Optional[Mapping[Id, float]] = None,
) -> Tuple[CoefficientSet, LiftingRecord]:
    """Run the full decomposition down to tau scaling coefficients.

    The removal order follows the minimum-integral rule (ties broken by the
    seeded generator) unless an explicit trajectory is given.  Passing
    `initial_integrals` overrides the scheme's initialisation.
    """
    missing = [k for k in lg.ids if k not in values]
    if missing:
        raise LiftingError(f"missing values for new vertices {missing[:3]!r}")
    coeffs = {k: float(values[k]) for k in lg.ids}
    for k, v in coeffs.items():
        if not math.isfinite(v):
            raise LiftingError(f"non-finite value at {k!r}")

    lifter = _Lifter(lg, config, initial_integrals)
    n_stages = lg.m - config.tau
    if trajectory is not None:
        trajectory = list(trajectory)
        if len(trajectory) != n_stages:
            raise LiftingError(
                f"trajectory length {len(trajectory)} != m - tau = {n_stages}"
            )
        if len(set(trajectory)) != len(trajectory):
            raise LiftingError("trajectory contains repeated ids")
        bad = [k for k in trajectory if k not in lg.index]
        if bad:
            raise LiftingError(f"trajectory references unknown ids {bad[:3]!r}")

    initial = dict(lifter.integrals)
    details: Dict[Id, float] = {}
    scales: Dict[Id, float] = {}
    stages: List[LiftingStage] = []
    for i in range(n_stages):
        k = trajectory[i] if trajectory is not None else lifter.choose_next()
        d, st = lifter.lift_stage(coeffs, k, lg.m - i)
        details[k] = d
        scales[k] = st.integral
        stages.append(st)

    surviving = tuple(sorted(lifter.active, key=lg.index.__getitem__))
    record = LiftingRecord(
        stages=tuple(stages),
        initial_integrals=initial,
        final_integrals={k: lifter.integrals[k] for k in surviving},
        surviving=surviving,
        config=config,
        ids=lg.ids,
    )
    coeffset = CoefficientSet(
        details=details,
        scaling={k: coeffs[k] for k in surviving},
        scales=scales,
    )
    if len(details) >= 3:
        coeffset.levels = assign_artificial_levels(coeffset, record)
    return coeffset, record


def forward_with_trajectory(
    values: Mapping[Id, float],
    lg: LineGraph,
    config: LiftingConfig,
    trajectory: Sequence[Id],
) -> Tuple[CoefficientSet, LiftingRecord]:
    """Decomposition with the removal order fixed in advance."""
    return forward(values, lg, config, trajectory=trajectory)


def inverse(coeffs: CoefficientSet, record: LiftingRecord) -> Dict[Id, float]:
    """Exact reconstruction by undoing each archived stage in reverse."""
    expected_details = set(record.removal_order)
    if set(coeffs.details) != expected_details or set(coeffs.scaling) != set(record.surviving):
        raise LiftingError("coefficient index sets do not match the record")
    c = dict(coeffs.scaling)
    for st in reversed(record.stages):
        d = coeffs.details[st.removed]
        for w, s in zip(st.b, st.neighbors):
            c[s] -= w * d
        c[st.removed] = d + sum(w * c[s] for w, s in zip(st.a, st.neighbors))
    return c


def assign_artificial_levels(
    coeffs: CoefficientSet, record: LiftingRecord, n_levels: Optional[int] = None
) -> Dict[Id, int]:
    """Group details into resolution-like levels by quantiles of scale.

    Level 0 is the finest (smallest scales).  Ties in scale are broken by
    removal order, earlier removals counting as finer.  The default level
    count is max(3, floor(log2(m))).
    """
    m = len(record.ids)
    n_details = len(coeffs.details)
    if n_levels is None:
        n_levels = max(3, int(math.log2(m)))
    if n_levels < 3:
        raise LiftingError(f"need at least 3 levels, got {n_levels}")
    if n_levels > n_details:
        raise LiftingError(f"{n_levels} levels exceed the {n_details} details")
    removal_pos = {k: i for i, k in enumerate(record.removal_order)}
    ranked = sorted(coeffs.details, key=lambda k: (coeffs.scales[k], removal_pos[k]))
    bounds = [round(j * n_details / n_levels) for j in range(n_levels + 1)]
    levels = {}
    for lev in range(n_levels):
        for k in ranked[bounds[lev] : bounds[lev + 1]]:
            levels[k] = lev
    return levels
