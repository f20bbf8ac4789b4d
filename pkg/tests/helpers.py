"""Shared test utilities: random graph builders and a finite-difference
gradient checker."""

from __future__ import annotations

import numpy as np
import torch

from heig.graph import (
    Account,
    AccountType,
    HEIG,
    InteractionEdge,
    InteractionType,
    build_heig,
)


def random_accounts(rng: np.random.Generator, n: int) -> list[Account]:
    accounts = []
    for i in range(n):
        kind = AccountType.CA if rng.random() < 0.4 else AccountType.EOA
        label = bool(rng.integers(2)) if (kind is AccountType.CA and rng.random() < 0.5) else None
        accounts.append(Account(f"0x{i:04d}", kind, label))
    return accounts


def random_edges(
    rng: np.random.Generator, accounts: list[Account], n_edges: int
) -> list[InteractionEdge]:
    cas = [a.id for a in accounts if a.kind is AccountType.CA]
    ids = [a.id for a in accounts]
    edges = []
    for _ in range(n_edges):
        src = ids[int(rng.integers(len(ids)))]
        if cas and rng.random() < 0.4:
            kind = InteractionType.CALL
            dst = cas[int(rng.integers(len(cas)))]
        else:
            kind = InteractionType.TRANS
            dst = ids[int(rng.integers(len(ids)))]
        edges.append(
            InteractionEdge(src, dst, kind, int(rng.integers(1, 6)), float(rng.exponential(2.0)))
        )
    return edges


def random_heig(seed: int, n_nodes: int = 30, n_edges: int = 120) -> HEIG:
    rng = np.random.default_rng(seed)
    n_nodes = max(n_nodes, 2)
    accounts = random_accounts(rng, n_nodes)
    if not any(a.kind is AccountType.CA for a in accounts):
        accounts[0] = Account(accounts[0].id, AccountType.CA, None)
    edges = random_edges(rng, accounts, n_edges)
    return build_heig(accounts, edges)


def central_difference_grads(fn, params, h: float = 1e-6) -> list[torch.Tensor]:
    """Central finite differences of a scalar-valued closure w.r.t. each
    parameter tensor (evaluated with gradients disabled)."""
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat = p.view(-1)
            gf = g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                f_plus = float(fn())
                flat[i] = orig - h
                f_minus = float(fn())
                flat[i] = orig
                gf[i] = (f_plus - f_minus) / (2.0 * h)
            grads.append(g)
    return grads


def max_relative_grad_error(fn, params, h: float = 1e-6, floor: float = 1e-6) -> float:
    """Worst-case relative disagreement between autograd and central
    differences over all parameters."""
    for p in params:
        p.grad = None
    loss = fn()
    loss.backward()
    # parameters unused by this instance (e.g. relations with no edges) get None
    analytic = [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        for p in params
    ]
    numeric = central_difference_grads(fn, params, h=h)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = torch.clamp(torch.maximum(a.abs(), n.abs()), min=floor)
        worst = max(worst, ((a - n).abs() / denom).max().item())
    return worst
