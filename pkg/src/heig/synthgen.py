"""Synthetic interaction graphs with planted Ponzi-style motifs.

A Ponzi contract attracts staged waves of investor deposits and funds
payouts to a strict subset of earlier investors out of that inflow, so its
transfer balance stays positive.  Normal contracts serve customers with
roughly balanced in/out flow.  Motif parameters are drawn per node from
configurable ranges, operational noise keeps every feature column varying
within each class, and per-relation background edges keep all six triplet
relations populated.  Generation is deterministic under the seed and the
emission ledger records the exact per-relation distinct-edge counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from heig.errors import InvalidSpec
from heig.graph import (
    Account,
    AccountType,
    HEIG,
    InteractionEdge,
    InteractionType,
    TripletRelation,
    build_heig,
    classify_triplet,
)
from heig.ingest import RawRecord


def _default_amounts() -> dict[TripletRelation, tuple[float, float]]:
    # lognormal (mu, sigma) of noise/background amounts, per relation
    return {rel: (-2.0, 0.5) for rel in TripletRelation}


def _default_density() -> dict[TripletRelation, float]:
    # expected background edges per source-type node
    return {
        TripletRelation.CA_CALL_CA: 0.8,
        TripletRelation.CA_TRANS_CA: 0.6,
        TripletRelation.CA_TRANS_EOA: 0.5,
        TripletRelation.EOA_CALL_CA: 0.6,
        TripletRelation.EOA_TRANS_CA: 0.6,
        TripletRelation.EOA_TRANS_EOA: 1.2,
    }


@dataclass
class SynthSpec:
    n_ponzi: int = 50
    n_normal: int = 50
    n_eoa: int = 1000
    investor_range: tuple[int, int] = (15, 60)
    payout_fraction: tuple[float, float] = (0.3, 0.85)  # share of earlier investors repaid
    payout_scale: tuple[float, float] = (0.3, 0.95)  # payout size vs deposit
    invest_amount: tuple[float, float] = (0.5, 0.8)  # lognormal mu/sigma of deposits
    customer_range: tuple[int, int] = (5, 40)
    outflow_ratio: tuple[float, float] = (0.6, 1.3)  # normal-CA outflow vs inflow
    amounts: Mapping[TripletRelation, tuple[float, float]] = field(
        default_factory=_default_amounts
    )
    background_density: Mapping[TripletRelation, float] = field(
        default_factory=_default_density
    )
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_ponzi, self.n_normal, self.n_eoa) < 0:
            raise InvalidSpec("node counts must be >= 0")
        for name, rng_pair in (
            ("investor_range", self.investor_range),
            ("customer_range", self.customer_range),
        ):
            lo, hi = rng_pair
            if lo < 1 or hi < lo:
                raise InvalidSpec(f"{name} must satisfy 1 <= lo <= hi, got {rng_pair}")
        for name, (lo, hi) in (
            ("payout_fraction", self.payout_fraction),
            ("payout_scale", self.payout_scale),
        ):
            if not (0.0 <= lo <= hi <= 1.0):
                raise InvalidSpec(f"{name} must lie in [0, 1], got {(lo, hi)}")
        for rel, density in self.background_density.items():
            if density < 0:
                raise InvalidSpec(f"background density for {rel.token} must be >= 0")


@dataclass
class SynthResult:
    graph: HEIG
    labels: dict[str, bool]
    ledger: dict[TripletRelation, int]
    records: list[RawRecord]


def generate(spec: SynthSpec) -> SynthResult:
    """Generate a labeled synthetic HEIG plus its emission ledger."""
    rng = np.random.default_rng(spec.seed)

    ponzi_ids = [f"0xp{i:05d}" for i in range(spec.n_ponzi)]
    normal_ids = [f"0xn{i:05d}" for i in range(spec.n_normal)]
    eoa_ids = [f"0xe{i:06d}" for i in range(spec.n_eoa)]
    ca_ids = ponzi_ids + normal_ids
    kind_of = {aid: AccountType.CA for aid in ca_ids}
    kind_of.update({aid: AccountType.EOA for aid in eoa_ids})

    records: list[RawRecord] = []
    emitted: dict[TripletRelation, set[tuple[str, str, InteractionType]]] = {
        rel: set() for rel in TripletRelation
    }

    def emit(src: str, dst: str, kind: InteractionType, value: float) -> None:
        rel = classify_triplet(kind_of[src], kind, kind_of[dst])
        emitted[rel].add((src, dst, kind))
        records.append(RawRecord(src, dst, kind, float(max(value, 0.0))))

    def noise_amount(rel: TripletRelation) -> float:
        mu, sigma = spec.amounts[rel]
        return float(rng.lognormal(mu, sigma))

    def pick_other_ca(own: str) -> str:
        other = ca_ids[int(rng.integers(len(ca_ids)))]
        while other == own and len(ca_ids) > 1:
            other = ca_ids[int(rng.integers(len(ca_ids)))]
        return other

    def ca_operational_noise(ca: str) -> None:
        # keeps call/trans activity varying within each CA class
        if len(ca_ids) > 1:
            for _ in range(1 + int(rng.poisson(2.0))):
                target = pick_other_ca(ca)
                value = 0.0 if rng.random() < 0.4 else noise_amount(TripletRelation.CA_CALL_CA)
                emit(ca, target, InteractionType.CALL, value)
            for _ in range(int(rng.poisson(1.5))):
                emit(ca, pick_other_ca(ca), InteractionType.TRANS,
                     noise_amount(TripletRelation.CA_TRANS_CA))
        if eoa_ids:
            for _ in range(int(rng.poisson(1.0))):
                dst = eoa_ids[int(rng.integers(len(eoa_ids)))]
                emit(ca, dst, InteractionType.TRANS,
                     noise_amount(TripletRelation.CA_TRANS_EOA))

    mu_inv, sigma_inv = spec.invest_amount
    for p in ponzi_ids:
        if not eoa_ids:
            break
        n_inv = int(rng.integers(spec.investor_range[0], spec.investor_range[1] + 1))
        n_inv = min(n_inv, len(eoa_ids))
        investors = [eoa_ids[i] for i in rng.choice(len(eoa_ids), n_inv, replace=False)]
        deposits = rng.lognormal(mu_inv, sigma_inv, size=n_inv)
        for j, (inv, amount) in enumerate(zip(investors, deposits)):
            emit(inv, p, InteractionType.TRANS, amount)
            # investors invoke the contract; force one call so every Ponzi CA
            # is identifiable as a call target
            if j == 0 or rng.random() < 0.75:
                value = 0.0 if rng.random() < 0.5 else 0.05 * amount
                emit(inv, p, InteractionType.CALL, value)
        frac = rng.uniform(*spec.payout_fraction)
        scale = rng.uniform(*spec.payout_scale)
        n_pay = min(int(frac * n_inv), max(n_inv - 1, 0))
        for inv, amount in zip(investors[:n_pay], deposits[:n_pay]):
            emit(p, inv, InteractionType.TRANS, scale * amount)
        ca_operational_noise(p)

    for c in normal_ids:
        if not eoa_ids:
            break
        n_cust = int(rng.integers(spec.customer_range[0], spec.customer_range[1] + 1))
        n_cust = min(n_cust, len(eoa_ids))
        customers = [eoa_ids[i] for i in rng.choice(len(eoa_ids), n_cust, replace=False)]
        payments = rng.lognormal(mu_inv - 0.3, sigma_inv, size=n_cust)
        for j, (cust, amount) in enumerate(zip(customers, payments)):
            emit(cust, c, InteractionType.TRANS, amount)
            if j == 0 or rng.random() < 0.8:
                value = 0.0 if rng.random() < 0.5 else 0.02 * amount
                emit(cust, c, InteractionType.CALL, value)
        inflow = float(payments.sum())
        outflow = inflow * rng.uniform(*spec.outflow_ratio)
        n_out = max(1, int(rng.integers(1, n_cust + 1)))
        shares = rng.dirichlet(np.ones(n_out)) * outflow
        targets = [customers[i] for i in rng.choice(n_cust, n_out, replace=False)]
        for dst, share in zip(targets, shares):
            emit(c, dst, InteractionType.TRANS, share)
        ca_operational_noise(c)

    # per-relation background edges
    pools = {AccountType.CA: ca_ids, AccountType.EOA: eoa_ids}
    for rel in TripletRelation:
        src_pool = pools[rel.src_kind]
        dst_pool = pools[rel.dst_kind]
        if not src_pool or not dst_pool:
            continue
        n_bg = int(round(spec.background_density.get(rel, 0.0) * len(src_pool)))
        for _ in range(n_bg):
            src = src_pool[int(rng.integers(len(src_pool)))]
            dst = dst_pool[int(rng.integers(len(dst_pool)))]
            if src == dst and len(dst_pool) > 1:
                continue
            value = 0.0 if (rel.edge_kind is InteractionType.CALL and rng.random() < 0.4) \
                else noise_amount(rel)
            emit(src, dst, rel.edge_kind, value)

    labels = {aid: True for aid in ponzi_ids}
    labels.update({aid: False for aid in normal_ids})
    accounts = [Account(aid, kind_of[aid], labels.get(aid)) for aid in kind_of]
    edges = [InteractionEdge(r.src, r.dst, r.kind, 1, r.value) for r in records]
    graph = build_heig(accounts, edges)
    ledger = {rel: len(emitted[rel]) for rel in TripletRelation}
    return SynthResult(graph, labels, ledger, records)
