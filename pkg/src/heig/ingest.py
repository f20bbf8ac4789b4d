"""Raw-record parsing, two-hop neighborhood expansion, and count-grouped
top-k filtering of second-order edges.

Dataset assembly keeps every edge incident to a labeled seed account and
thins only the second-order fringe: aggregated second-order edges are
grouped by their exact interaction ``count`` and, within each group, only
the fraction ``k`` with the largest ``sum`` survives (at least one per
group).  This biases retention toward high-value interactions while
preserving the count distribution of the original neighborhood.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from heig.errors import InsufficientNegatives, InvalidK, ParseError
from heig.graph import (
    Account,
    AccountType,
    HEIG,
    InteractionEdge,
    InteractionType,
    aggregate_edges,
    build_heig,
)

RECORD_COLUMNS = ("from", "to", "kind", "value", "timestamp")


@dataclass(frozen=True)
class RawRecord:
    """One raw interaction row: a single transfer or call."""

    src: str
    dst: str
    kind: InteractionType
    value: float
    timestamp: Optional[int] = None  # parsed but unused downstream


@dataclass
class DatasetSpec:
    """Assembly parameters for one dataset version."""

    seed_labels: dict[str, bool]
    negative_sample_size: int
    k: float
    seed: int

    def __post_init__(self) -> None:
        if not (0.0 < self.k <= 1.0):
            raise InvalidK(f"k must be in (0, 1], got {self.k}")


def parse_records(path: str) -> list[RawRecord]:
    """Parse a records CSV with columns ``from,to,kind,value[,timestamp]``.

    Blank lines and ``#`` comment lines are skipped.  Malformed rows raise
    :class:`ParseError` carrying the 1-based line number.
    """
    records: list[RawRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header: Optional[list[str]] = None
        has_timestamp = False
        for lineno, row in enumerate(reader, start=1):
            if not row or (row[0].startswith("#") and len(row) == 1):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header == list(RECORD_COLUMNS):
                    has_timestamp = True
                elif header == list(RECORD_COLUMNS[:4]):
                    has_timestamp = False
                else:
                    raise ParseError(
                        lineno, f"expected header from,to,kind,value[,timestamp], got {header}"
                    )
                continue
            expected = 5 if has_timestamp else 4
            if len(row) != expected:
                raise ParseError(lineno, f"expected {expected} columns, got {len(row)}")
            src, dst, kind_s, value_s = (c.strip() for c in row[:4])
            if not src or not dst:
                raise ParseError(lineno, "empty account id")
            try:
                kind = InteractionType(kind_s)
            except ValueError:
                raise ParseError(lineno, f"unknown interaction kind {kind_s!r}") from None
            try:
                value = float(value_s)
            except ValueError:
                raise ParseError(lineno, f"bad value {value_s!r}") from None
            if not math.isfinite(value) or value < 0:
                raise ParseError(lineno, f"value must be finite and >= 0, got {value_s}")
            timestamp = None
            if has_timestamp and row[4].strip() != "":
                try:
                    timestamp = int(row[4].strip())
                except ValueError:
                    raise ParseError(lineno, f"bad timestamp {row[4]!r}") from None
            records.append(RawRecord(src, dst, kind, value, timestamp))
        if header is None:
            raise ParseError(1, "missing header row")
    return records


def write_records_csv(path: str, records: Iterable[RawRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            ts = "" if r.timestamp is None else r.timestamp
            writer.writerow([r.src, r.dst, r.kind.value, repr(r.value), ts])


@dataclass
class TwoHopPartition:
    first_order: list[RawRecord] = field(default_factory=list)
    second_order: list[RawRecord] = field(default_factory=list)


def expand_two_hop(
    records: Sequence[RawRecord], seeds: set[str]
) -> TwoHopPartition:
    """Partition records into first-order (incident to a seed) and
    second-order (incident to a first-order neighbor, not to a seed).
    Records beyond two hops are discarded.
    """
    if not seeds:
        raise ValueError("seeds must be non-empty")
    part = TwoHopPartition()
    neighbors: set[str] = set()
    rest: list[RawRecord] = []
    for r in records:
        if r.src in seeds or r.dst in seeds:
            part.first_order.append(r)
            neighbors.add(r.src)
            neighbors.add(r.dst)
        else:
            rest.append(r)
    neighbors -= seeds
    for r in rest:
        if r.src in neighbors or r.dst in neighbors:
            part.second_order.append(r)
    return part


def records_to_edges(records: Sequence[RawRecord]) -> list[InteractionEdge]:
    """Aggregate raw records into edges: count = number of records per
    (src, dst, kind), sum = total value."""
    return aggregate_edges(
        InteractionEdge(r.src, r.dst, r.kind, 1, r.value) for r in records
    )


def topk_filter(
    second_order: Sequence[InteractionEdge], k: float
) -> list[InteractionEdge]:
    """Keep, within each group of edges sharing the same ``count``, the
    ceil(k * group size) edges with the largest ``sum`` (at least one).

    Ties are broken lexicographically by (src, dst, kind) so the survivor
    set is deterministic, and selection for smaller k is always a subset of
    the selection for larger k.
    """
    if not (0.0 < k <= 1.0):
        raise InvalidK(f"k must be in (0, 1], got {k}")
    groups: dict[int, list[InteractionEdge]] = {}
    for e in second_order:
        groups.setdefault(e.count, []).append(e)
    kept: list[InteractionEdge] = []
    for count in groups:
        group = sorted(groups[count], key=lambda e: (-e.sum, e.src, e.dst, e.kind.value))
        n_keep = max(1, math.ceil(k * len(group)))
        kept.extend(group[:n_keep])
    kept.sort(key=lambda e: (e.src, e.dst, e.kind.value))
    return kept


def infer_account_kinds(
    ids: Iterable[str],
    edges: Sequence[InteractionEdge],
    known_ca: Iterable[str] = (),
) -> dict[str, AccountType]:
    """Infer account types when no type information is supplied.

    Any call target must be a contract, and every labeled account is a
    contract; everything else defaults to EOA.
    """
    kinds = {aid: AccountType.EOA for aid in ids}
    for aid in known_ca:
        if aid in kinds:
            kinds[aid] = AccountType.CA
    for e in edges:
        if e.kind is InteractionType.CALL:
            kinds[e.dst] = AccountType.CA
    return kinds


def assemble_dataset(
    records: Sequence[RawRecord],
    spec: DatasetSpec,
    kinds: Optional[Mapping[str, AccountType]] = None,
) -> HEIG:
    """Build one dataset version from raw records.

    Seeds are all positive accounts plus ``negative_sample_size`` negatives
    drawn uniformly without replacement using ``spec.seed``.  The output
    graph covers seeds, their first-order neighborhood, and the second-order
    edges that survive :func:`topk_filter`; labels are retained on the seed
    accounts only.

    ``kinds`` optionally supplies ground-truth account types; types of
    accounts not covered are inferred via :func:`infer_account_kinds`.
    """
    positives = sorted(a for a, y in spec.seed_labels.items() if y)
    negatives = sorted(a for a, y in spec.seed_labels.items() if not y)
    if spec.negative_sample_size > len(negatives):
        raise InsufficientNegatives(
            f"requested {spec.negative_sample_size} negatives, "
            f"only {len(negatives)} available"
        )
    rng = random.Random(spec.seed)
    sampled_negatives = sorted(rng.sample(negatives, spec.negative_sample_size))

    seeds = set(positives) | set(sampled_negatives)
    part = expand_two_hop(records, seeds)
    first_edges = records_to_edges(part.first_order)
    second_edges = topk_filter(records_to_edges(part.second_order), spec.k)
    edges = first_edges + second_edges

    ids = set(seeds)
    for e in edges:
        ids.add(e.src)
        ids.add(e.dst)

    inferred = infer_account_kinds(ids, edges, known_ca=spec.seed_labels)
    if kinds is not None:
        for aid, kind in kinds.items():
            if aid in inferred:
                inferred[aid] = kind

    labels: dict[str, bool] = {a: True for a in positives}
    labels.update({a: False for a in sampled_negatives})

    accounts = [
        Account(aid, inferred[aid], labels.get(aid)) for aid in sorted(ids)
    ]
    return build_heig(accounts, edges)
