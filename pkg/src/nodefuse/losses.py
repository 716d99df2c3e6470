"""Contrastive objectives: NT-Xent pairwise/view losses and the controller loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .model import EmbeddingSet, FusionWeights, ModelParams, project
from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class ContrastConfig:
    tau: float = 0.5
    beta1: float = 1.0   # weight of the contextual term
    beta2: float = 1.0   # weight of the fusion term

    def __post_init__(self):
        if self.tau <= 0:
            raise ContractError(f"temperature must be positive, got {self.tau}")
        if self.beta1 < 0 or self.beta2 < 0:
            raise ContractError("beta weights must be nonnegative")


@dataclass(frozen=True)
class ControllerConfig:
    alpha1: float = 1e4
    alpha2: float = 1.0
    epsilon: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ContractError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ContractError("alpha weights must be nonnegative")


def _as_array(z) -> np.ndarray:
    return z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(a @ b / (na * nb))


def ntxent_pair_loss(z, z_aug, i: int, tau: float) -> float:
    """Pairwise loss for anchor row i of `z` against its augmented positive.

    The denominator runs over the 2N - 1 negatives-plus-positive: all
    intra-view rows except the anchor itself, and every cross-view row
    (including the positive). Computed with a max-shift for stability.
    """
    z = _as_array(z)
    z_aug = _as_array(z_aug)
    n = z.shape[0]
    if n < 2:
        raise ContractError("ntxent_pair_loss needs at least 2 nodes")
    if z.shape != z_aug.shape:
        raise ContractError(f"shapes {z.shape} and {z_aug.shape} differ")
    sims = []
    for j in range(n):
        if j != i:
            sims.append(_cos(z[i], z[j]) / tau)
    for j in range(n):
        sims.append(_cos(z[i], z_aug[j]) / tau)
    sims = np.array(sims)
    pos = _cos(z[i], z_aug[i]) / tau
    m = sims.max()
    return float(-pos + m + np.log(np.exp(sims - m).sum()))


def view_loss(z: Tensor, z_aug: Tensor, tau: float) -> Tensor:
    """Symmetrized NT-Xent over all anchors, averaged over 2N terms.

    Cosine similarities are bounded by 1, so exp((s - 1)/tau) is used as the
    stabilized kernel; the constant shift cancels in the final expression.
    """
    n = z.rows
    if n < 2:
        raise ContractError("view_loss needs at least 2 nodes")
    if z.shape != z_aug.shape:
        raise ContractError(f"view_loss: shapes {z.shape} and {z_aug.shape} differ")
    zn = T.normalize_rows(z)
    an = T.normalize_rows(z_aug)
    total = T.ntxent_view(zn, an, 1.0 / tau)
    return T.scale(total, 1.0 / (2.0 * n))


def contrast_terms(emb: EmbeddingSet, params: ModelParams, cfg: ContrastConfig,
                   include_semantic: bool = True, include_context: bool = True,
                   include_fusion: bool = True):
    """Yield the enabled weighted view-loss terms one at a time.

    A generator so callers can backpropagate each term before the next one is
    built; only one view's NxN similarity matrices are then alive at once,
    which keeps memory flat at large node counts.
    """
    if not (include_semantic or include_context or include_fusion):
        raise ContractError("at least one contrast term must be enabled")
    if include_semantic:
        yield view_loss(project(params, emb.h_s),
                        project(params, emb.h_s_aug), cfg.tau)
    if include_context:
        yield T.scale(view_loss(project(params, emb.h_c),
                                project(params, emb.h_c_aug), cfg.tau),
                      cfg.beta1)
    if include_fusion:
        yield T.scale(view_loss(project(params, emb.h_f),
                                project(params, emb.h_f_aug), cfg.tau),
                      cfg.beta2)


def contrast_loss(emb: EmbeddingSet, params: ModelParams, cfg: ContrastConfig,
                  include_semantic: bool = True, include_context: bool = True,
                  include_fusion: bool = True) -> Tensor:
    """Weighted sum of the semantic, contextual, and fusion view losses."""
    total = None
    for term in contrast_terms(emb, params, cfg, include_semantic,
                               include_context, include_fusion):
        total = term if total is None else T.add(total, term)
    return total


def controller_loss(lam, h_s: Tensor, h_c: Tensor, cfg: ControllerConfig) -> Tensor:
    """Similarity-weighted lambda sum plus the two distribution penalties.

    The view embeddings enter as constants; only lambda (and through it the
    controller parameters) receives gradient.
    """
    lam_t = lam.lam if isinstance(lam, FusionWeights) else lam
    sims = T.cosine_rows(h_s.detach(), h_c.detach())
    if sims.shape != lam_t.shape:
        raise ContractError(
            f"lambda shape {lam_t.shape} does not match {sims.shape} similarities"
        )
    total = T.sum_all(T.mul(lam_t, sims))
    if cfg.alpha1 != 0.0:
        norm = T.sqrt(T.sum_all(T.mul(lam_t, lam_t)))
        total = T.add(total, T.scale(norm, cfg.alpha1))
    if cfg.alpha2 != 0.0:
        pen = T.absolute(T.add_scalar(T.mean_all(lam_t), -cfg.epsilon))
        total = T.add(total, T.scale(pen, cfg.alpha2))
    return total
