"""Episodic training objectives as pure differentiable loss functions.

Every loss returns a LossBreakdown whose ``total`` is a negated evidence
bound (minimization convention).  Losses accept either a float-valued view
(plain evaluation) or a tape-backed view (training); the arithmetic is
identical, so the two paths agree bitwise.

Several objectives are definitionally special cases of the set-conditional
bound: the single-element bound, the resample-only and rescale-only
variants all delegate to ``loss_vhe`` after reshaping their episode, which
makes the textbook identities between them exact rather than approximate.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import adiff
from .dists import (
    draw_noise,
    gaussian_kl,
    kl_to_standard_normal,
    reparam_sample,
)
from .errors import ConfigError, UsageError
from .model import FACTORIAL, HIERARCHICAL, LATENT_Z, Model
from .synthdata import Episode

KINDS = ("vae", "ns", "vhe", "resample", "rescale", "vhe_z", "structured",
         "hierarchical", "tightened")


@dataclass
class ObjectiveSpec:
    kind: str
    d_size: int = 1
    kl_weight_override: float | None = None
    mc_samples: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown objective kind {self.kind!r}")
        if self.d_size < 1:
            raise UsageError("d_size must be >= 1")
        if self.mc_samples < 1:
            raise UsageError("mc_samples must be >= 1")

    @property
    def kl_weight(self) -> float:
        return 1.0 if self.kl_weight_override is None else self.kl_weight_override


@dataclass
class LossBreakdown:
    """Signed pieces of one negated bound.

    total = -(recon - sum_i weights[i] * <component i>), where the
    components are kl_c, kl_c2 (second factor), kl_a (group level), kl_z
    (per element), and subset_cost (the tightened bound's correction).
    """

    total: object
    recon: object
    kl_c: object
    kl_c2: object = None
    kl_a: object = None
    kl_z: object = None
    subset_cost: object = None
    weights: dict = field(default_factory=dict)


def _default_spec(kind: str) -> ObjectiveSpec:
    return ObjectiveSpec(kind)


def _mean(vals):
    total = vals[0]
    for v in vals[1:]:
        total = total + v
    return total if len(vals) == 1 else total / float(len(vals))


def loss_vhe(params, episode: Episode, rng, spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Reconstruct x from c ~ q(c; D), paying KL / class_size."""
    spec = spec or _default_spec("vhe")
    if episode.class_size < len(episode.d):
        raise UsageError("class_size smaller than the support set")
    if not episode.d:
        raise UsageError("empty support set")
    q_c = params.encode_class(episode.d)
    recons = []
    for _ in range(spec.mc_samples):
        noise = draw_noise(rng, params.latent_dim)
        c = reparam_sample(q_c, noise)
        recons.append(params.decode_logpdf(c, episode.x))
    recon = _mean(recons)
    kl_c = kl_to_standard_normal(q_c)
    w = spec.kl_weight / episode.class_size
    total = -(recon - w * kl_c)
    return LossBreakdown(total, recon, kl_c, weights={"kl_c": w})


def loss_vae(params, x: float, rng, spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Single-element bound: the set-conditional loss on D = {x}, |X| = 1."""
    episode = Episode(x=x, d=[x], class_size=1, class_id=-1,
                      x_index=0, d_indices=[0])
    return loss_vhe(params, episode, rng, spec or _default_spec("vae"))


def loss_resample(params, episode: Episode, rng,
                  spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Decoded element resampled from the class, KL paid per support element."""
    clipped = Episode(x=episode.x, d=episode.d, class_size=len(episode.d),
                      class_id=episode.class_id, x_index=episode.x_index,
                      d_indices=episode.d_indices)
    return loss_vhe(params, clipped, rng, spec or _default_spec("resample"))


def loss_rescale(params, x: float, d: list[float], class_size: int, rng,
                 spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Decoded element drawn from D itself, KL paid per class element."""
    if x not in d:
        raise UsageError("rescale-only reconstructs an element of D")
    episode = Episode(x=x, d=d, class_size=class_size, class_id=-1,
                      x_index=0, d_indices=list(range(len(d))))
    return loss_vhe(params, episode, rng, spec or _default_spec("rescale"))


def loss_ns(params, d: list[float], rng,
            spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Set-level bound: reconstruct every element of D, one unscaled KL."""
    spec = spec or _default_spec("ns")
    if not d:
        raise UsageError("empty support set")
    q_c = params.encode_class(d)
    recons = []
    for _ in range(spec.mc_samples):
        noise = draw_noise(rng, params.latent_dim)
        c = reparam_sample(q_c, noise)
        terms = [params.decode_logpdf(c, x) for x in d]
        total_term = terms[0]
        for t in terms[1:]:
            total_term = total_term + t
        recons.append(total_term)
    recon = _mean(recons)
    kl_c = kl_to_standard_normal(q_c)
    w = spec.kl_weight
    total = -(recon - w * kl_c)
    return LossBreakdown(total, recon, kl_c, weights={"kl_c": w})


def loss_vhe_z(params, episode: Episode, rng,
               spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Class latent plus per-element latent; only the class KL is rescaled."""
    spec = spec or _default_spec("vhe_z")
    if getattr(params, "mode", None) != LATENT_Z:
        raise ConfigError("objective needs a model with a per-element latent")
    if episode.class_size < len(episode.d):
        raise UsageError("class_size smaller than the support set")
    q_c = params.encode_class(episode.d)
    recons, klzs = [], []
    for _ in range(spec.mc_samples):
        noise_c = draw_noise(rng, params.latent_dim)
        c = reparam_sample(q_c, noise_c)
        q_z = params.encode_z(episode.x, c)
        noise_z = draw_noise(rng, 1)
        z = reparam_sample(q_z, noise_z)
        recons.append(params.decode_logpdf(c, episode.x, z))
        klzs.append(kl_to_standard_normal(q_z))
    recon = _mean(recons)
    kl_z = _mean(klzs)
    kl_c = kl_to_standard_normal(q_c)
    w_c = spec.kl_weight / episode.class_size
    w_z = spec.kl_weight
    total = -(recon - w_c * kl_c - w_z * kl_z)
    return LossBreakdown(total, recon, kl_c, kl_z=kl_z,
                         weights={"kl_c": w_c, "kl_z": w_z})


def loss_structured(params, x: float, supports: list, rng,
                    spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """One latent per factor, each with its own support and its own 1/|X_i|."""
    spec = spec or _default_spec("structured")
    n_factors = 2 if getattr(params, "mode", None) == FACTORIAL else 1
    if len(supports) != n_factors:
        raise UsageError(
            f"model has {n_factors} latent factor(s), got {len(supports)} supports")
    if n_factors == 1:
        d, size = supports[0]
        episode = Episode(x=x, d=list(d), class_size=size, class_id=-1,
                          x_index=0, d_indices=list(range(len(d))))
        return loss_vhe(params, episode, rng, spec)
    for d, size in supports:
        if not d:
            raise UsageError("empty factor support")
        if size < len(d):
            raise UsageError("factor size smaller than its support")
    q0 = params.encode_factor(0, supports[0][0])
    q1 = params.encode_factor(1, supports[1][0])
    recons = []
    for _ in range(spec.mc_samples):
        c0 = reparam_sample(q0, draw_noise(rng, params.latent_dim))
        c1 = reparam_sample(q1, draw_noise(rng, params.latent_dim))
        recons.append(params.decode_logpdf(c0 + c1, x))
    recon = _mean(recons)
    kl0 = kl_to_standard_normal(q0)
    kl1 = kl_to_standard_normal(q1)
    w0 = spec.kl_weight / supports[0][1]
    w1 = spec.kl_weight / supports[1][1]
    total = -(recon - w0 * kl0 - w1 * kl1)
    return LossBreakdown(total, recon, kl0, kl_c2=kl1,
                         weights={"kl_c": w0, "kl_c2": w1})


def loss_hierarchical(params, x: float, d_a: list[float], d_c: list[float],
                      group_size: int, class_size: int, rng,
                      spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Group latent a, class latent c | a; KLs rescaled by their set sizes."""
    spec = spec or _default_spec("hierarchical")
    if getattr(params, "mode", None) != HIERARCHICAL:
        raise ConfigError("objective needs a model with a group latent")
    if not d_a or not d_c:
        raise UsageError("empty support set")
    if group_size < len(d_a) or class_size < len(d_c):
        raise UsageError("set size smaller than its support")
    q_a = params.encode_group(d_a)
    recons, klcs = [], []
    for _ in range(spec.mc_samples):
        a = reparam_sample(q_a, draw_noise(rng, params.latent_dim))
        q_c = params.encode_class(d_c, a=a)
        c = reparam_sample(q_c, draw_noise(rng, params.latent_dim))
        recons.append(params.decode_logpdf(c, x))
        klcs.append(gaussian_kl(q_c, params.conditional_prior(a)))
    recon = _mean(recons)
    kl_c = _mean(klcs)
    kl_a = kl_to_standard_normal(q_a)
    w_a = spec.kl_weight / group_size
    w_c = spec.kl_weight / class_size
    total = -(recon - w_a * kl_a - w_c * kl_c)
    return LossBreakdown(total, recon, kl_c, kl_a=kl_a,
                         weights={"kl_c": w_c, "kl_a": w_a})


def log_binomial(n: int, k: int) -> float:
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


def build_aux(latent_dim: int, class_sizes: dict, seed: int = 0) -> Model:
    """Parameters of the subset reweighting: a linear scorer on c plus one
    embedding per class element.  Same flat-vector container as a model, so
    the trainer and checkpoints treat it uniformly."""
    if latent_dim < 1:
        raise UsageError("latent_dim must be >= 1")
    rng = random.Random(seed)
    slices = {}
    values: list[float] = []

    def add(name, size, weight_like):
        lo = len(values)
        if weight_like:
            values.extend(rng.gauss(0.0, 0.01) for _ in range(size))
        else:
            values.extend([0.0] * size)
        slices[name] = (lo, len(values))

    add("psi_w", latent_dim, True)
    add("psi_b", 1, False)
    for cid in sorted(class_sizes):
        if class_sizes[cid] < 1:
            raise UsageError("class sizes must be >= 1")
        add(f"xi_c{cid}", class_sizes[cid], True)
    meta = {"kind": "subset_aux", "latent_dim": latent_dim, "init_seed": seed}
    return Model(meta, slices, values)


def loss_tightened(params, aux, episode: Episode, full_class: list[float], rng,
                   spec: ObjectiveSpec | None = None) -> LossBreakdown:
    """Set-conditional bound with a learned reweighting of support subsets.

    The usual KL cost is corrected by -log r(D; c, X) + log q'(D; X), where
    r scores each support element by softmax over the class of f(c) * xi_d
    and q' is uniform over size-|D| subsets.  With a constant f or equal
    embeddings the correction collapses to a constant and the loss equals
    the plain set-conditional loss plus that constant.
    """
    spec = spec or _default_spec("tightened")
    if episode.class_size != len(full_class):
        raise UsageError("full_class must be the episode's whole class")
    if episode.class_size < len(episode.d):
        raise UsageError("class_size smaller than the support set")
    if any(not 0 <= i < len(full_class) for i in episode.d_indices):
        raise UsageError("support indices fall outside the class")
    try:
        xi = aux.vec(f"xi_c{episode.class_id}")
    except UsageError as exc:
        raise ConfigError(
            f"no subset embeddings for class {episode.class_id}") from exc
    if len(xi) != len(full_class):
        raise ConfigError("one embedding per class element is required")
    psi_w = aux.vec("psi_w")
    psi_b = aux.scalar("psi_b")
    if len(psi_w) != params.latent_dim:
        raise ConfigError("subset scorer dimension mismatch")
    q_c = params.encode_class(episode.d)
    log_qprime = -log_binomial(len(full_class), len(episode.d))
    recons, subset_terms = [], []
    for _ in range(spec.mc_samples):
        noise = draw_noise(rng, params.latent_dim)
        c = reparam_sample(q_c, noise)
        recons.append(params.decode_logpdf(c, episode.x))
        f = adiff.dot(psi_w, c) + psi_b
        scores = [f * x for x in xi]
        lse = adiff.logsumexp(scores)
        log_r = scores[episode.d_indices[0]] - lse
        for i in episode.d_indices[1:]:
            log_r = log_r + (scores[i] - lse)
        subset_terms.append(-log_r + log_qprime)
    recon = _mean(recons)
    subset_cost = _mean(subset_terms)
    kl_c = kl_to_standard_normal(q_c)
    w = spec.kl_weight / episode.class_size
    total = -(recon - w * kl_c - w * subset_cost)
    return LossBreakdown(total, recon, kl_c, subset_cost=subset_cost,
                         weights={"kl_c": w, "subset_cost": w})
