"""Per-relation conditional VAE over neighbor features.

For each triplet relation, the generator learns the distribution of
neighbor (target-account) features conditioned on the source account's
features.  The encoder maps ``concat(x_u, x_v)`` to a diagonal Gaussian
posterior ``(mu, sigma)`` over the latent; the decoder maps
``concat(z, x_v)`` back to feature space.  The prior is a fixed standard
normal and the reconstruction likelihood is a unit-variance Gaussian, so
minimizing ``kl + recon`` maximizes the evidence lower bound.

All tensors are float64 so gradient checks against central finite
differences are meaningful at tight tolerances.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from heig.containers import load_container, save_container
from heig.errors import DimensionMismatch, EmptyTrainingSet, NonFinite
from heig.graph import FEATURE_DIM, TripletRelation

DTYPE = torch.float64


@dataclass
class CvaeConfig:
    feature_dim: int = FEATURE_DIM
    cond_dim: int = FEATURE_DIM
    latent_dim: int = 8
    hidden_dims: tuple[int, ...] = (32,)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden widths must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _mlp(in_dim: int, hidden: tuple[int, ...], out_dim: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    prev = in_dim
    for width in hidden:
        layers.append(nn.Linear(prev, width, dtype=DTYPE))
        layers.append(nn.Tanh())
        prev = width
    layers.append(nn.Linear(prev, out_dim, dtype=DTYPE))
    return nn.Sequential(*layers)


def _as_tensor(x, dim: int, name: str) -> torch.Tensor:
    t = torch.as_tensor(x, dtype=DTYPE)
    if t.shape[-1] != dim:
        raise DimensionMismatch(
            f"{name}: expected trailing dimension {dim}, got {tuple(t.shape)}"
        )
    return t


class TripletCvae(nn.Module):
    """Encoder/decoder pair specialized to one triplet relation."""

    def __init__(self, relation: TripletRelation, config: CvaeConfig):
        super().__init__()
        self.relation = relation
        self.config = config
        self.encoder = _mlp(
            config.feature_dim + config.cond_dim,
            config.hidden_dims,
            2 * config.latent_dim,
        )
        self.decoder = _mlp(
            config.latent_dim + config.cond_dim,
            config.hidden_dims,
            config.feature_dim,
        )
        self.loss_history: list[float] = []

    def encode(self, x_u, x_v) -> tuple[torch.Tensor, torch.Tensor]:
        """Posterior parameters (mu, sigma) of the latent given a neighbor
        pair.  Accepts single vectors or batches."""
        x_u = _as_tensor(x_u, self.config.feature_dim, "x_u")
        x_v = _as_tensor(x_v, self.config.cond_dim, "x_v")
        out = self.encoder(torch.cat([x_u, x_v], dim=-1))
        mu, log_var = out.chunk(2, dim=-1)
        sigma = torch.exp(0.5 * log_var)
        return mu, sigma

    def decode(self, z, x_v) -> torch.Tensor:
        z = _as_tensor(z, self.config.latent_dim, "z")
        x_v = _as_tensor(x_v, self.config.cond_dim, "x_v")
        return self.decoder(torch.cat([z, x_v], dim=-1))

    def elbo(self, x_u, x_v, eps) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Per-pair negative ELBO: ``(total, kl, recon)``.

        ``eps`` is the standard-normal draw used for reparameterization;
        injecting it keeps the loss deterministic under test.  Batched
        inputs return the mean over the batch.
        """
        mu, sigma = self.encode(x_u, x_v)
        eps = _as_tensor(eps, self.config.latent_dim, "eps")
        z = reparameterize(mu, sigma, eps)
        recon_x = self.decode(z, x_v)
        x_u = _as_tensor(x_u, self.config.feature_dim, "x_u")
        kl = kl_standard_normal(mu, sigma)
        # unit-variance Gaussian reconstruction NLL up to an additive constant
        recon = 0.5 * (recon_x - x_u).pow(2).sum(-1)
        total = kl + recon
        if total.dim() > 0:
            total, kl, recon = total.mean(), kl.mean(), recon.mean()
        if not torch.isfinite(total):
            raise NonFinite("ELBO loss is not finite")
        return total, kl, recon


def kl_standard_normal(mu, sigma) -> torch.Tensor:
    """Closed-form KL(N(mu, diag sigma^2) || N(0, I)); non-negative for any
    sigma > 0."""
    mu = torch.as_tensor(mu, dtype=DTYPE)
    sigma = torch.as_tensor(sigma, dtype=DTYPE)
    return 0.5 * (mu.pow(2) + sigma.pow(2) - 1.0 - torch.log(sigma.pow(2))).sum(-1)


def reparameterize(mu, sigma, eps) -> torch.Tensor:
    """``z = mu + eps * sigma`` elementwise."""
    mu = torch.as_tensor(mu, dtype=DTYPE)
    sigma = torch.as_tensor(sigma, dtype=DTYPE)
    eps = torch.as_tensor(eps, dtype=DTYPE)
    if mu.shape != sigma.shape or mu.shape != eps.shape:
        raise DimensionMismatch(
            f"mu/sigma/eps shapes differ: {tuple(mu.shape)}, "
            f"{tuple(sigma.shape)}, {tuple(eps.shape)}"
        )
    return mu + eps * sigma


def new_cvae(relation: TripletRelation, config: CvaeConfig) -> TripletCvae:
    """A freshly initialized model with parameters seeded by the config."""
    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        return TripletCvae(relation, config)


def pretrain(
    relation: TripletRelation,
    pairs: tuple[np.ndarray, np.ndarray],
    config: CvaeConfig,
) -> TripletCvae:
    """Train a relation-specific generator on (x_v, x_u) neighbor pairs.

    ``pairs`` holds the stacked condition matrix ``x_v`` and neighbor
    matrix ``x_u`` (one row per edge of the relation).  Training minimizes
    the negative ELBO with Adam; the mean per-pair loss of every epoch is
    recorded on ``model.loss_history``.
    """
    x_v, x_u = pairs
    x_v = torch.as_tensor(np.asarray(x_v), dtype=DTYPE)
    x_u = torch.as_tensor(np.asarray(x_u), dtype=DTYPE)
    if x_v.shape[0] == 0:
        raise EmptyTrainingSet(f"no training pairs for relation {relation.token}")
    if x_v.shape[0] != x_u.shape[0]:
        raise DimensionMismatch("x_v and x_u must have equal row counts")

    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        model = TripletCvae(relation, config)
        optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
        n = x_v.shape[0]
        batch = min(config.batch_size, n)
        for _ in range(config.epochs):
            perm = torch.randperm(n)
            epoch_loss = 0.0
            for start in range(0, n, batch):
                idx = perm[start : start + batch]
                eps = torch.randn(len(idx), config.latent_dim, dtype=DTYPE)
                total, _, _ = model.elbo(x_u[idx], x_v[idx], eps)
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
                epoch_loss += total.item() * len(idx)
            model.loss_history.append(epoch_loss / n)
    return model


def generate(
    model: TripletCvae,
    x_v,
    generator: torch.Generator | None = None,
    z: torch.Tensor | None = None,
) -> torch.Tensor:
    """Sample new neighbor features conditioned on ``x_v``.

    ``z`` is drawn from a standard normal unless injected explicitly.
    Accepts a single condition vector or a batch.
    """
    x_v = _as_tensor(x_v, model.config.cond_dim, "x_v")
    if z is None:
        shape = x_v.shape[:-1] + (model.config.latent_dim,)
        z = torch.randn(shape, dtype=DTYPE, generator=generator)
    with torch.no_grad():
        return model.decode(z, x_v)


# ---------------------------------------------------------------------------
# Checkpointing: one container per relation.


def cvae_state_arrays(model: TripletCvae) -> dict[str, np.ndarray]:
    return {k: v.detach().numpy() for k, v in model.state_dict().items()}


def save_cvae(path: str, model: TripletCvae) -> None:
    meta = {
        "kind": "triplet_cvae",
        "relation": model.relation.token,
        "config": asdict(model.config),
        "loss_history": model.loss_history,
    }
    save_container(path, cvae_state_arrays(model), meta)


def load_cvae(path: str) -> TripletCvae:
    arrays, meta = load_container(path)
    if meta.get("kind") != "triplet_cvae":
        raise ValueError(f"{path} is not a generator checkpoint")
    config = CvaeConfig(**{**meta["config"], "hidden_dims": tuple(meta["config"]["hidden_dims"])})
    relation = TripletRelation[meta["relation"].upper()]
    model = TripletCvae(relation, config)
    model.load_state_dict({k: torch.as_tensor(v, dtype=DTYPE) for k, v in arrays.items()})
    model.loss_history = list(meta.get("loss_history", []))
    return model
