"""The 14-dimensional behavior features computed from incident edges.

Canonical layout (all derived from aggregated edge ``count``/``sum``):

====  =======================  ==============================================
 idx  name                     definition
====  =======================  ==============================================
 0    trans_out_total          total Ether sent via trans edges
 1    trans_out_avg            trans_out_total / outgoing trans count
 2    trans_in_total           total Ether received via trans edges
 3    trans_in_avg             trans_in_total / incoming trans count
 4    call_out_total           total Ether sent via call edges
 5    call_out_avg             call_out_total / outgoing call count
 6    call_in_total            total Ether received via call edges
 7    call_in_avg              call_in_total / incoming call count
 8    trans_balance            trans_in_total - trans_out_total
 9    call_balance             call_in_total - call_out_total
 10   trans_out_count          number of initiated trans interactions
 11   trans_in_count           number of received trans interactions
 12   call_out_count           number of initiated call interactions
 13   call_in_count            number of received call interactions
====  =======================  ==============================================

Averages divide by the summed interaction count of the direction/kind
bucket and are 0 when that bucket is empty.  No normalization happens
here; z-scoring is applied later with statistics fit on the training
split only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from heig.errors import UnknownAccount
from heig.graph import FEATURE_DIM, AccountType, HEIG, InteractionType

FEATURE_NAMES = (
    "trans_out_total",
    "trans_out_avg",
    "trans_in_total",
    "trans_in_avg",
    "call_out_total",
    "call_out_avg",
    "call_in_total",
    "call_in_avg",
    "trans_balance",
    "call_balance",
    "trans_out_count",
    "trans_in_count",
    "call_out_count",
    "call_in_count",
)

assert len(FEATURE_NAMES) == FEATURE_DIM


def account_features(g: HEIG, account_id: str) -> np.ndarray:
    """Compute the 14-feature vector of one account from its incident edges."""
    if account_id not in g.accounts:
        raise UnknownAccount(f"unknown account {account_id!r}")

    # per (kind, direction): [total sum, total count]
    totals = {
        (InteractionType.TRANS, "out"): [0.0, 0],
        (InteractionType.TRANS, "in"): [0.0, 0],
        (InteractionType.CALL, "out"): [0.0, 0],
        (InteractionType.CALL, "in"): [0.0, 0],
    }
    for idx in g.out_edges(account_id):
        e = g.edges[idx]
        totals[(e.kind, "out")][0] += e.sum
        totals[(e.kind, "out")][1] += e.count
    for idx in g.in_edges(account_id):
        e = g.edges[idx]
        totals[(e.kind, "in")][0] += e.sum
        totals[(e.kind, "in")][1] += e.count

    def avg(kind: InteractionType, direction: str) -> float:
        total, count = totals[(kind, direction)]
        return total / count if count > 0 else 0.0

    t_out, t_in = totals[(InteractionType.TRANS, "out")], totals[(InteractionType.TRANS, "in")]
    c_out, c_in = totals[(InteractionType.CALL, "out")], totals[(InteractionType.CALL, "in")]
    return np.array(
        [
            t_out[0],
            avg(InteractionType.TRANS, "out"),
            t_in[0],
            avg(InteractionType.TRANS, "in"),
            c_out[0],
            avg(InteractionType.CALL, "out"),
            c_in[0],
            avg(InteractionType.CALL, "in"),
            t_in[0] - t_out[0],
            c_in[0] - c_out[0],
            float(t_out[1]),
            float(t_in[1]),
            float(c_out[1]),
            float(c_in[1]),
        ],
        dtype=np.float64,
    )


def feature_matrix(g: HEIG, kind: AccountType) -> np.ndarray:
    """Feature matrix of all accounts of a type, rows in ascending id order."""
    ids = g.ids_of(kind)
    out = np.zeros((len(ids), FEATURE_DIM), dtype=np.float64)
    for row, aid in enumerate(ids):
        out[row] = account_features(g, aid)
    return out


def attach_features(g: HEIG) -> None:
    """Store each account's feature vector on the account object."""
    for kind in AccountType:
        mat = feature_matrix(g, kind)
        for row, aid in enumerate(g.ids_of(kind)):
            g.accounts[aid].features = mat[row]


def write_features_csv(path: str, ids: tuple[str, ...], matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("id",) + FEATURE_NAMES)
        for aid, row in zip(ids, matrix):
            writer.writerow([aid] + [repr(float(v)) for v in row])


def read_features_csv(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ("id",) + FEATURE_NAMES:
            raise ValueError(f"unexpected feature CSV header in {path}")
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    matrix = np.array(rows, dtype=np.float64) if rows else np.zeros((0, FEATURE_DIM))
    return tuple(ids), matrix


@dataclass
class Standardizer:
    """Per-dimension z-scoring with statistics frozen at fit time."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "Standardizer":
        if matrix.shape[0] == 0:
            return cls(np.zeros(matrix.shape[1]), np.ones(matrix.shape[1]))
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        std = np.where(std > 0, std, 1.0)  # constant columns pass through
        return cls(mean, std)

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=np.float64) - self.mean) / self.std

    def inverse(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix, dtype=np.float64) * self.std + self.mean
