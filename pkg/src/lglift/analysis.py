"""Matrix form of the transform, stability and compression diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .graph import Id, LineGraph
from .lifting import (
    CoefficientSet,
    LiftingConfig,
    LiftingError,
    LiftingRecord,
    forward,
    forward_with_trajectory,
    inverse,
)


@dataclass(frozen=True)
class TransformMatrices:
    """Dense forward/inverse matrices with their coefficient ordering.

    Rows of `forward_matrix` follow the canonical coefficient order:
    details in removal order, then scaling ids ascending by line-graph
    position.  Columns follow the line-graph id order.  `inverse_matrix`
    is indexed the other way around, so forward @ inverse = identity.
    """

    forward_matrix: np.ndarray
    inverse_matrix: np.ndarray
    coefficient_order: Tuple[Id, ...]
    value_order: Tuple[Id, ...]
    record: LiftingRecord


def coefficient_order(record: LiftingRecord) -> Tuple[Id, ...]:
    idx = {k: i for i, k in enumerate(record.ids)}
    return record.removal_order + tuple(sorted(record.surviving, key=idx.__getitem__))


def build_matrices(
    lg: LineGraph,
    config: LiftingConfig,
    trajectory: Optional[Sequence[Id]] = None,
) -> TransformMatrices:
    """Assemble the transform as dense matrices.

    The removal order is fixed once (from the seed or the given
    trajectory), then the forward map is replayed on each canonical basis
    vector; the inverse map likewise on canonical coefficient vectors, so
    the two matrices are built independently of each other.
    """
    m = lg.m
    probe = {k: 0.0 for k in lg.ids}
    _, record = forward(probe, lg, config, trajectory=trajectory)
    order = record.removal_order

    corder = coefficient_order(record)
    fwd = np.empty((m, m))
    for j, k in enumerate(lg.ids):
        unit = {s: (1.0 if s == k else 0.0) for s in lg.ids}
        coeffs, _ = forward_with_trajectory(unit, lg, config, order)
        fwd[:, j] = coeffs.as_vector(record)

    inv = np.empty((m, m))
    vpos = {k: i for i, k in enumerate(lg.ids)}
    n_details = len(order)
    for j in range(m):
        details = {k: 0.0 for k in order}
        scaling = {k: 0.0 for k in record.surviving}
        if j < n_details:
            details[corder[j]] = 1.0
        else:
            scaling[corder[j]] = 1.0
        unit_set = CoefficientSet(details=details, scaling=scaling, scales={})
        values = inverse(unit_set, record)
        for k, v in values.items():
            inv[vpos[k], j] = v

    return TransformMatrices(
        forward_matrix=fwd,
        inverse_matrix=inv,
        coefficient_order=corder,
        value_order=lg.ids,
        record=record,
    )


def condition_number(matrices: TransformMatrices) -> float:
    """Ratio of the extreme singular values of the forward matrix."""
    sv = np.linalg.svd(matrices.forward_matrix, compute_uv=False)
    if sv[-1] <= 0 or not np.isfinite(sv[-1]):
        raise LiftingError("transform not invertible")
    return float(sv[0] / sv[-1])


@dataclass(frozen=True)
class SparsityCurve:
    """ISE as a function of how many largest details are retained.

    `ise[t-1]` is the error with the scaling coefficients plus the t-1
    largest-magnitude details, t = 1 .. m - tau + 1.
    """

    ise: np.ndarray

    def as_rows(self) -> List[Tuple[int, float]]:
        return [(t + 1, float(v)) for t, v in enumerate(self.ise)]


def sparsity_curve_single(
    true_values: Dict[Id, float], lg: LineGraph, config: LiftingConfig
) -> SparsityCurve:
    """Greedy largest-|d| reconstruction error curve for one graph."""
    coeffs, record = forward(true_values, lg, config)
    order = sorted(coeffs.details, key=lambda k: abs(coeffs.details[k]), reverse=True)
    ise = np.empty(len(order) + 1)
    kept: Dict[Id, float] = {k: 0.0 for k in coeffs.details}
    for t in range(len(order) + 1):
        if t > 0:
            kept[order[t - 1]] = coeffs.details[order[t - 1]]
        trial = CoefficientSet(details=dict(kept), scaling=coeffs.scaling, scales={})
        rec = inverse(trial, record)
        ise[t] = sum((rec[k] - true_values[k]) ** 2 for k in lg.ids)
    return SparsityCurve(ise=ise)


def sparsity_curve(
    per_graph: Sequence[Tuple[Dict[Id, float], LineGraph]], config: LiftingConfig
) -> SparsityCurve:
    """Average the greedy ISE curve over several (values, graph) pairs."""
    if not per_graph:
        raise LiftingError("sparsity_curve needs at least one graph")
    curves = [sparsity_curve_single(v, lg, config).ise for v, lg in per_graph]
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise LiftingError("sparsity curves have mismatched lengths across graphs")
    return SparsityCurve(ise=np.mean(curves, axis=0))


def export_matrix_csv(matrices: TransformMatrices, path: str) -> None:
    """Row-major CSV of the forward matrix, header carrying the orderings."""
    header = "coefficients:" + "|".join(map(str, matrices.coefficient_order))
    header += ";values:" + "|".join(map(str, matrices.value_order))
    np.savetxt(path, matrices.forward_matrix, delimiter=",", fmt="%.17g", header=header)
