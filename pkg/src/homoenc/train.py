"""Minibatch training loop for the episodic objectives.

One run walks the class list in a fresh shuffled order each epoch, draws one
episode per class, and takes one Adam step per minibatch of M episodes. The
KL term is annealed linearly over the first ``anneal_epochs`` epochs, which
are in addition to the main epoch budget. Multiple independent restarts
differ in both the initial parameters and the episode stream, and the run
with the lowest final-epoch training loss wins.

Per-episode draw order, for reproducibility:
  vae                        x
  ns                         support
  rescale                    support, then x from the support
  vhe / resample / vhe_z /
    tightened                x, then support        (synthdata.sample_episode)
  structured                 x, content support, style support
  hierarchical               x, class support, group support
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, replace

from .adiff import Tape, value_of
from .errors import ConfigError, DomainError, NumericError, UsageError
from .model import FACTORIAL, FLAT, HIERARCHICAL, LATENT_Z, Model, ModelView
from .objectives import (
    ObjectiveSpec,
    build_aux,
    loss_hierarchical,
    loss_ns,
    loss_rescale,
    loss_resample,
    loss_structured,
    loss_tightened,
    loss_vae,
    loss_vhe,
    loss_vhe_z,
)
from .synthdata import Dataset, factor_elements, sample_episode

MODE_FOR_KIND = {
    "hierarchical": HIERARCHICAL,
    "structured": FACTORIAL,
    "vhe_z": LATENT_Z,
}


@dataclass
class TrainConfig:
    objective: ObjectiveSpec
    M: int = 16
    epochs: int = 200
    anneal_epochs: int = 50
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    runs: int = 3

    def __post_init__(self):
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")
        if self.anneal_epochs < 0:
            raise UsageError("anneal_epochs must be >= 0")
        if not self.lr > 0.0:
            raise UsageError("lr must be > 0")
        if self.runs < 1:
            raise UsageError("runs must be >= 1")
        if self.M < 1:
            raise UsageError("M must be >= 1")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise UsageError("betas must lie in [0, 1)")
        if not self.eps > 0.0:
            raise UsageError("eps must be > 0")

    @property
    def total_epochs(self) -> int:
        return self.epochs + self.anneal_epochs


@dataclass
class TrainHistory:
    losses: list[float]
    kls: list[float]
    weights: list[float]
    model: Model
    aux: Model | None
    seconds: float
    seed: int


@dataclass
class AdamState:
    m: list[float]
    v: list[float]

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls([0.0] * n, [0.0] * n)


def adam_step(state: AdamState, params, grads, lr, beta1, beta2, eps,
              t: int):
    """One bias-corrected Adam update; returns (new params, new state)."""
    if t < 1:
        raise UsageError("adam step count starts at 1")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise UsageError("params, grads and state must have equal length")
    for j, g in enumerate(grads):
        if not math.isfinite(g):
            raise NumericError(f"non-finite gradient at parameter {j}")
    m = [beta1 * mi + (1.0 - beta1) * g for mi, g in zip(state.m, grads)]
    v = [beta2 * vi + (1.0 - beta2) * g * g for vi, g in zip(state.v, grads)]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new = [p - lr * (mi / c1) / (math.sqrt(vi / c2) + eps)
           for p, mi, vi in zip(params, m, v)]
    return new, AdamState(m, v)


def anneal_weight(epoch: int, anneal_epochs: int) -> float:
    """Linear KL ramp: reaches 1 at epoch anneal_epochs - 1, then stays."""
    if epoch < 0:
        raise UsageError("epoch must be >= 0")
    if anneal_epochs == 0:
        return 1.0
    return min(1.0, (epoch + 1) / anneal_epochs)


def _clone(model: Model) -> Model:
    return Model(model.meta, model.slices, list(model.values))


def _check_compatible(dataset: Dataset, model: Model, spec: ObjectiveSpec):
    view = ModelView(model)
    family = dataset.meta["family"]
    if view.family != family:
        raise ConfigError(
            f"model family {view.family!r} does not match dataset {family!r}")
    need_mode = MODE_FOR_KIND.get(spec.kind, FLAT)
    if view.mode != need_mode:
        raise ConfigError(
            f"objective {spec.kind!r} needs a {need_mode!r} model, got {view.mode!r}")
    structure = dataset.meta["structure"]
    if spec.kind == "hierarchical" and structure != HIERARCHICAL:
        raise ConfigError(
            f"objective 'hierarchical' needs grouped data, got {structure!r}")
    if spec.kind == "structured" and structure != FACTORIAL:
        raise ConfigError(
            f"objective 'structured' needs factorial data, got {structure!r}")
    if spec.kind != "vae":
        smallest = min(len(rec.elements) for rec in dataset.classes)
        if spec.d_size > smallest:
            raise ConfigError(
                f"d_size {spec.d_size} exceeds smallest class size {smallest}")


def _factor_pools(dataset: Dataset, spec: ObjectiveSpec) -> dict:
    pools = {}
    if spec.kind == "structured":
        for rec in dataset.classes:
            for factor, fid in (("content", rec.content_id),
                                ("style", rec.style_id)):
                if (factor, fid) not in pools:
                    pools[(factor, fid)] = factor_elements(dataset, factor, fid)
    elif spec.kind == "hierarchical":
        for rec in dataset.classes:
            if ("group", rec.group_id) not in pools:
                pools[("group", rec.group_id)] = factor_elements(
                    dataset, "group", rec.group_id)
    return pools


def _sub(rng: random.Random, pool: list[float], k: int) -> list[float]:
    return [pool[i] for i in rng.sample(range(len(pool)), k)]


def _episode_loss(view, aux_view, dataset, rec, spec, rng, pools):
    kind = spec.kind
    els = rec.elements
    if kind == "vae":
        return loss_vae(view, els[rng.randrange(len(els))], rng, spec)
    if kind == "ns":
        return loss_ns(view, _sub(rng, els, spec.d_size), rng, spec)
    if kind == "rescale":
        d = _sub(rng, els, spec.d_size)
        return loss_rescale(view, d[rng.randrange(len(d))], d, len(els), rng,
                            spec)
    if kind in ("vhe", "resample", "vhe_z", "tightened"):
        episode = sample_episode(dataset, rec.class_id, spec.d_size, rng)
        if kind == "vhe":
            return loss_vhe(view, episode, rng, spec)
        if kind == "resample":
            return loss_resample(view, episode, rng, spec)
        if kind == "vhe_z":
            return loss_vhe_z(view, episode, rng, spec)
        return loss_tightened(view, aux_view, episode, els, rng, spec)
    if kind == "structured":
        x = els[rng.randrange(len(els))]
        supports = []
        for factor, fid in (("content", rec.content_id),
                            ("style", rec.style_id)):
            pool = pools[(factor, fid)]
            supports.append((_sub(rng, pool, spec.d_size), len(pool)))
        return loss_structured(view, x, supports, rng, spec)
    x = els[rng.randrange(len(els))]
    d_c = _sub(rng, els, spec.d_size)
    pool = pools[("group", rec.group_id)]
    d_a = _sub(rng, pool, spec.d_size)
    return loss_hierarchical(view, x, d_a, d_c, len(pool), len(els), rng,
                             spec)


def train_run(dataset: Dataset, model_init: Model, config: TrainConfig,
              freeze=()) -> TrainHistory:
    """Train one model on one dataset; deterministic given all inputs.

    ``freeze`` names parameter slices whose gradients are zeroed, which
    pins them to their initial values.
    """
    spec = config.objective
    _check_compatible(dataset, model_init, spec)
    t0 = time.perf_counter()
    model = _clone(model_init)
    aux = None
    if spec.kind == "tightened":
        sizes = {rec.class_id: len(rec.elements) for rec in dataset.classes}
        aux = build_aux(ModelView(model).latent_dim, sizes, seed=config.seed)
    pools = _factor_pools(dataset, spec)
    frozen = set(model.indices(freeze))
    rng = random.Random(config.seed)
    state = AdamState.zeros(model.n_params + (aux.n_params if aux else 0))
    step = 0
    losses, kls, weights = [], [], []
    base_w = spec.kl_weight
    for epoch in range(config.total_epochs):
        w = anneal_weight(epoch, config.anneal_epochs) * base_w
        epoch_spec = replace(spec, kl_weight_override=w)
        order = list(dataset.classes)
        rng.shuffle(order)
        loss_sum = 0.0
        kl_sum = 0.0
        for lo in range(0, len(order), config.M):
            chunk = order[lo:lo + config.M]
            tape = Tape()
            view = ModelView(model, tape)
            aux_view = ModelView(aux, tape) if aux is not None else None
            totals = []
            for rec in chunk:
                try:
                    out = _episode_loss(view, aux_view, dataset, rec,
                                        epoch_spec, rng, pools)
                except (OverflowError, ValueError, DomainError) as exc:
                    # diverged parameters push the scalar kernels out of
                    # their domains before the loss value even exists
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, step {step}"
                    ) from exc
                totals.append(out.total)
                loss_sum += value_of(out.total)
                kl_sum += value_of(out.kl_c)
            batch = totals[0]
            for t in totals[1:]:
                batch = batch + t
            if len(totals) > 1:
                batch = batch / float(len(totals))
            if not math.isfinite(value_of(batch)):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, step {step}")
            grads = tape.backward()
            for j in frozen:
                grads[j] = 0.0
            step += 1
            try:
                params = (model.values + aux.values) if aux else model.values
                params, state = adam_step(state, params, grads, config.lr,
                                          config.beta1, config.beta2,
                                          config.eps, step)
            except NumericError as e:
                raise NumericError(
                    f"{e} (epoch {epoch}, step {step})") from None
            model.values[:] = params[:model.n_params]
            if aux is not None:
                aux.values[:] = params[model.n_params:]
        losses.append(loss_sum / len(order))
        kls.append(kl_sum / len(order))
        weights.append(w)
    return TrainHistory(losses=losses, kls=kls, weights=weights, model=model,
                        aux=aux, seconds=time.perf_counter() - t0,
                        seed=config.seed)


def train_multi(dataset: Dataset, init_fn, config: TrainConfig,
                freeze=()) -> list[TrainHistory]:
    """Independent restarts: run r uses seed + r for both init and episodes."""
    out = []
    for r in range(config.runs):
        run_seed = config.seed + r
        cfg = replace(config, seed=run_seed)
        out.append(train_run(dataset, init_fn(run_seed), cfg, freeze))
    return out


def select_best(histories: list[TrainHistory]) -> TrainHistory:
    """The run with the lowest final-epoch mean loss; ties keep the first."""
    if not histories:
        raise UsageError("select_best needs at least one run")
    best = histories[0]
    for h in histories[1:]:
        if h.losses[-1] < best.losses[-1]:
            best = h
    return best
