"""Domain types for the heterogeneous Ethereum interaction graph.

Accounts are either contracts (CA) or externally owned (EOA); interactions
are Ether transfers (``trans``) or contract calls (``call``).  Because a
call can only target a contract, exactly six (source type, interaction
type, target type) triplet relations exist.  The graph stores one
aggregated edge per (src, dst, kind) carrying ``count`` (number of
underlying interactions) and ``sum`` (total Ether moved), and indexes
edges by triplet relation in both directions.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from heig.errors import (
    DanglingEndpoint,
    DuplicateAccount,
    InvalidCallTarget,
    ParseError,
)

FEATURE_DIM = 14

# Amounts are stored as floating ether values; declared in CSV headers.
AMOUNT_UNIT = "ether"


class AccountType(Enum):
    CA = "ca"
    EOA = "eoa"


class InteractionType(Enum):
    TRANS = "trans"
    CALL = "call"


class TripletRelation(Enum):
    """The six valid (source type, interaction type, target type) patterns."""

    CA_CALL_CA = (AccountType.CA, InteractionType.CALL, AccountType.CA)
    CA_TRANS_CA = (AccountType.CA, InteractionType.TRANS, AccountType.CA)
    CA_TRANS_EOA = (AccountType.CA, InteractionType.TRANS, AccountType.EOA)
    EOA_CALL_CA = (AccountType.EOA, InteractionType.CALL, AccountType.CA)
    EOA_TRANS_CA = (AccountType.EOA, InteractionType.TRANS, AccountType.CA)
    EOA_TRANS_EOA = (AccountType.EOA, InteractionType.TRANS, AccountType.EOA)

    @property
    def src_kind(self) -> AccountType:
        return self.value[0]

    @property
    def edge_kind(self) -> InteractionType:
        return self.value[1]

    @property
    def dst_kind(self) -> AccountType:
        return self.value[2]

    @property
    def token(self) -> str:
        """Stable lowercase name used in file names and CSV output."""
        return self.name.lower()


_RELATION_BY_TRIPLET = {rel.value: rel for rel in TripletRelation}


def classify_triplet(
    src_kind: AccountType,
    edge_kind: InteractionType,
    dst_kind: AccountType,
) -> TripletRelation:
    """Map a (source type, interaction type, target type) triple to its relation.

    Raises:
        InvalidCallTarget: for call interactions targeting an EOA, which
            cannot occur on Ethereum.
    """
    if edge_kind is InteractionType.CALL and dst_kind is AccountType.EOA:
        raise InvalidCallTarget(
            f"call interaction cannot target an EOA ({src_kind.value} -> {dst_kind.value})"
        )
    return _RELATION_BY_TRIPLET[(src_kind, edge_kind, dst_kind)]


@dataclass
class Account:
    """An Ethereum account node.

    ``label`` is the Ponzi flag and exists only for some contract accounts;
    ``features`` is the 14-dimensional behavior vector, attached after
    feature extraction.
    """

    id: str
    kind: AccountType
    label: Optional[bool] = None
    features: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.label is not None and self.kind is not AccountType.CA:
            raise ValueError(f"account {self.id}: labels exist only on CA nodes")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.shape != (FEATURE_DIM,):
                raise ValueError(
                    f"account {self.id}: features must have dimension {FEATURE_DIM}"
                )
            if not np.all(np.isfinite(self.features)):
                raise ValueError(f"account {self.id}: features must be finite")


@dataclass(frozen=True)
class InteractionEdge:
    """A directed, aggregated interaction between two accounts."""

    src: str
    dst: str
    kind: InteractionType
    count: int
    sum: float

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"edge {self.src}->{self.dst}: count must be >= 1")
        if not math.isfinite(self.sum) or self.sum < 0:
            raise ValueError(
                f"edge {self.src}->{self.dst}: sum must be finite and >= 0"
            )


def _edge_sort_key(e: InteractionEdge) -> tuple:
    return (e.src, e.dst, e.kind.value)


def aggregate_edges(edges: Iterable[InteractionEdge]) -> list[InteractionEdge]:
    """Merge parallel edges with identical (src, dst, kind), summing counts
    and amounts.  Output is sorted by (src, dst, kind) for determinism."""
    merged: dict[tuple[str, str, InteractionType], list] = {}
    for e in edges:
        key = (e.src, e.dst, e.kind)
        if key in merged:
            merged[key][0] += e.count
            merged[key][1] += e.sum
        else:
            merged[key] = [e.count, e.sum]
    out = [
        InteractionEdge(src, dst, kind, count, total)
        for (src, dst, kind), (count, total) in merged.items()
    ]
    out.sort(key=_edge_sort_key)
    return out


class HEIG:
    """Immutable heterogeneous Ethereum interaction graph.

    Construction validates endpoints and call targets, aggregates parallel
    edges, and builds a relation index that partitions the edge list across
    the six triplet relations, queryable in both directions.  Instances are
    never mutated after :func:`build_heig` returns, so concurrent readers
    are safe.
    """

    def __init__(self, accounts: dict[str, Account], edges: list[InteractionEdge]):
        self.accounts = accounts
        self.edges = edges
        self._relation_of: list[TripletRelation] = []
        self._rel_edges: dict[TripletRelation, list[int]] = {
            rel: [] for rel in TripletRelation
        }
        self._rel_in: dict[TripletRelation, dict[str, list[int]]] = {
            rel: {} for rel in TripletRelation
        }
        self._rel_out: dict[TripletRelation, dict[str, list[int]]] = {
            rel: {} for rel in TripletRelation
        }
        self._in: dict[str, list[int]] = {}
        self._out: dict[str, list[int]] = {}

        for idx, e in enumerate(edges):
            rel = classify_triplet(
                accounts[e.src].kind, e.kind, accounts[e.dst].kind
            )
            self._relation_of.append(rel)
            self._rel_edges[rel].append(idx)
            self._rel_in[rel].setdefault(e.dst, []).append(idx)
            self._rel_out[rel].setdefault(e.src, []).append(idx)
            self._in.setdefault(e.dst, []).append(idx)
            self._out.setdefault(e.src, []).append(idx)

        self.ca_ids: tuple[str, ...] = tuple(
            sorted(a.id for a in accounts.values() if a.kind is AccountType.CA)
        )
        self.eoa_ids: tuple[str, ...] = tuple(
            sorted(a.id for a in accounts.values() if a.kind is AccountType.EOA)
        )
        self._row: dict[str, int] = {}
        for row, aid in enumerate(self.ca_ids):
            self._row[aid] = row
        for row, aid in enumerate(self.eoa_ids):
            self._row[aid] = row

    @property
    def n_ca(self) -> int:
        return len(self.ca_ids)

    @property
    def n_eoa(self) -> int:
        return len(self.eoa_ids)

    def ids_of(self, kind: AccountType) -> tuple[str, ...]:
        return self.ca_ids if kind is AccountType.CA else self.eoa_ids

    def row_of(self, account_id: str) -> int:
        """Canonical row of an account within its type's matrix ordering."""
        return self._row[account_id]

    def relation_of(self, edge_index: int) -> TripletRelation:
        return self._relation_of[edge_index]

    def edges_of(self, relation: TripletRelation) -> list[InteractionEdge]:
        return [self.edges[i] for i in self._rel_edges[relation]]

    def edge_indices_of(self, relation: TripletRelation) -> list[int]:
        return self._rel_edges[relation]

    def in_edges(
        self, account_id: str, relation: Optional[TripletRelation] = None
    ) -> list[int]:
        if relation is None:
            return self._in.get(account_id, [])
        return self._rel_in[relation].get(account_id, [])

    def out_edges(
        self, account_id: str, relation: Optional[TripletRelation] = None
    ) -> list[int]:
        if relation is None:
            return self._out.get(account_id, [])
        return self._rel_out[relation].get(account_id, [])

    def labeled_ca(self) -> dict[str, bool]:
        """Labels of the labeled contract accounts, keyed by id."""
        return {
            a.id: a.label
            for a in self.accounts.values()
            if a.label is not None
        }


def build_heig(
    accounts: Sequence[Account], edges: Sequence[InteractionEdge]
) -> HEIG:
    """Construct a HEIG from accounts and (possibly parallel) edges.

    Parallel edges with identical (src, dst, kind) are merged by summing
    their counts and amounts, so the result stores at most one edge per
    (src, dst, kind).

    Raises:
        DuplicateAccount: two accounts share an id.
        DanglingEndpoint: an edge references an unknown account id.
        InvalidCallTarget: a call edge targets an EOA.
    """
    account_map: dict[str, Account] = {}
    for a in accounts:
        if a.id in account_map:
            raise DuplicateAccount(f"duplicate account id {a.id!r}")
        account_map[a.id] = a
    for e in edges:
        for endpoint in (e.src, e.dst):
            if endpoint not in account_map:
                raise DanglingEndpoint(
                    f"edge {e.src}->{e.dst} references unknown account {endpoint!r}"
                )
    return HEIG(account_map, aggregate_edges(edges))


@dataclass
class RelationStats:
    """Dataset statistics row: node counts per type, edge counts per relation."""

    n_ca: int
    n_eoa: int
    relation_counts: dict[TripletRelation, int] = field(default_factory=dict)

    def as_row(self) -> dict[str, int]:
        row = {"ca": self.n_ca, "eoa": self.n_eoa}
        for rel in TripletRelation:
            row[rel.token] = self.relation_counts.get(rel, 0)
        return row

    @property
    def total_edges(self) -> int:
        return sum(self.relation_counts.values())


def relation_stats(g: HEIG) -> RelationStats:
    return RelationStats(
        n_ca=g.n_ca,
        n_eoa=g.n_eoa,
        relation_counts={rel: len(g.edge_indices_of(rel)) for rel in TripletRelation},
    )


def format_stats_table(stats: RelationStats, name: str = "dataset") -> str:
    """Render a stats row as a one-line text table."""
    row = stats.as_row()
    headers = ["dataset", "CA", "EOA"] + [rel.token for rel in TripletRelation]
    values = [name, str(row["ca"]), str(row["eoa"])] + [
        str(row[rel.token]) for rel in TripletRelation
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    line = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    vals = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    return line + "\n" + vals


# ---------------------------------------------------------------------------
# Two-file CSV serialization: accounts.csv + edges.csv.


def _open_csv_rows(path: str) -> tuple[list[list[str]], list[int]]:
    """Read CSV rows, skipping blank and ``#`` comment lines.

    Returns rows plus their original 1-based line numbers.
    """
    rows, lines = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].startswith("#") and len(row) == 1):
                continue
            rows.append(row)
            lines.append(lineno)
    return rows, lines


def save_graph(g: HEIG, out_dir: str) -> tuple[str, str]:
    """Write ``accounts.csv`` and ``edges.csv`` under ``out_dir``.

    Output is deterministic: accounts sorted by id, edges already in
    canonical (src, dst, kind) order.
    """
    os.makedirs(out_dir, exist_ok=True)
    accounts_path = os.path.join(out_dir, "accounts.csv")
    edges_path = os.path.join(out_dir, "edges.csv")

    with open(accounts_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "kind", "label"])
        for aid in sorted(g.accounts):
            a = g.accounts[aid]
            label = "" if a.label is None else str(int(a.label))
            writer.writerow([a.id, a.kind.value, label])

    with open(edges_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# unit={AMOUNT_UNIT}\n")
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "kind", "count", "sum"])
        for e in g.edges:
            writer.writerow([e.src, e.dst, e.kind.value, e.count, repr(e.sum)])

    return accounts_path, edges_path


def load_graph(graph_dir: str) -> HEIG:
    """Load a HEIG from the two-file CSV serialization in ``graph_dir``."""
    accounts_path = os.path.join(graph_dir, "accounts.csv")
    edges_path = os.path.join(graph_dir, "edges.csv")
    accounts = load_accounts_csv(accounts_path)
    edges = load_edges_csv(edges_path)
    return build_heig(accounts, edges)


def load_accounts_csv(path: str) -> list[Account]:
    rows, lines = _open_csv_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["id", "kind", "label"]:
        raise ParseError(lines[0] if lines else 1, "expected header id,kind,label")
    accounts = []
    for row, lineno in zip(rows[1:], lines[1:]):
        if len(row) != 3:
            raise ParseError(lineno, f"expected 3 columns, got {len(row)}")
        aid, kind_s, label_s = (c.strip() for c in row)
        try:
            kind = AccountType(kind_s)
        except ValueError:
            raise ParseError(lineno, f"unknown account kind {kind_s!r}") from None
        if label_s == "":
            label = None
        elif label_s in ("0", "1"):
            label = bool(int(label_s))
        else:
            raise ParseError(lineno, f"label must be 0, 1 or empty, got {label_s!r}")
        try:
            accounts.append(Account(aid, kind, label))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    return accounts


def load_edges_csv(path: str) -> list[InteractionEdge]:
    rows, lines = _open_csv_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["src", "dst", "kind", "count", "sum"]:
        raise ParseError(lines[0] if lines else 1, "expected header src,dst,kind,count,sum")
    edges = []
    for row, lineno in zip(rows[1:], lines[1:]):
        if len(row) != 5:
            raise ParseError(lineno, f"expected 5 columns, got {len(row)}")
        src, dst, kind_s, count_s, sum_s = (c.strip() for c in row)
        try:
            kind = InteractionType(kind_s)
        except ValueError:
            raise ParseError(lineno, f"unknown interaction kind {kind_s!r}") from None
        try:
            count = int(count_s)
            total = float(sum_s)
        except ValueError:
            raise ParseError(lineno, f"bad count/sum: {count_s!r}, {sum_s!r}") from None
        try:
            edges.append(InteractionEdge(src, dst, kind, count, total))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    return edges


def read_labels_csv(path: str) -> dict[str, bool]:
    """Read a labels CSV with columns ``id,label`` (label in {0,1})."""
    rows, lines = _open_csv_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["id", "label"]:
        raise ParseError(lines[0] if lines else 1, "expected header id,label")
    labels: dict[str, bool] = {}
    for row, lineno in zip(rows[1:], lines[1:]):
        if len(row) != 2:
            raise ParseError(lineno, f"expected 2 columns, got {len(row)}")
        aid, label_s = (c.strip() for c in row)
        if label_s not in ("0", "1"):
            raise ParseError(lineno, f"label must be 0 or 1, got {label_s!r}")
        labels[aid] = bool(int(label_s))
    return labels


def write_labels_csv(path: str, labels: Mapping[str, bool]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"])
        for aid in sorted(labels):
            writer.writerow([aid, int(labels[aid])])
