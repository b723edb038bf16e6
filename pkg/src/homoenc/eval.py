"""Metrics for trained episodic models, plus the oracles that certify them.

Four metrics make up the standard suite: mean encoded information (analytic
KL of the support posterior to the prior), few-shot generation NLL on
held-out elements, few-shot classification error, and importance-weighted
joint NLL per element. Gauss-Hermite quadrature and the conjugate
closed form provide independent ground truth for the importance-weighted
estimate on low-dimensional latents.

Everything here is float-path and read-only: models are snapshots, and all
randomness comes from the caller's generator. Functions that sample per
class iterate classes in class-id order and document their draw order, so a
test can replay the stream.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass

from .adiff import logsumexp
from .dists import (
    draw_noise,
    gaussian_posterior_logpdf,
    kl_to_standard_normal,
    reparam_sample,
    standard_normal_logpdf,
)
from .errors import ParseError, UsageError
from .oracles import exact_logpX, gauss_hermite
from .synthdata import Dataset

CSV_HEADER = "objective,family,d_size,latent_dim,seed,metric,value"

METRIC_NAMES = (
    "encoded_information",
    "fewshot_generation_nll",
    "fewshot_classification_error",
    "iw_joint_nll",
)

AGGREGATES = ("expected_likelihood", "mean_log")


@dataclass
class EvalConfig:
    d_size: int
    k: int = 200
    mc_outer: int = 20
    n_way: int = 2
    nodes: int = 64
    seed: int = 0
    held_per_class: int = 10
    episodes_per_class: int = 10

    def __post_init__(self):
        if self.d_size < 1:
            raise UsageError("d_size must be >= 1")
        if self.k < 1:
            raise UsageError("k must be >= 1")
        if self.n_way < 2:
            raise UsageError("n_way must be >= 2")
        if self.nodes < 8:
            raise UsageError("nodes must be >= 8")
        if self.mc_outer < 1:
            raise UsageError("mc_outer must be >= 1")
        if self.held_per_class < 1:
            raise UsageError("held_per_class must be >= 1")
        if self.episodes_per_class < 1:
            raise UsageError("episodes_per_class must be >= 1")


@dataclass
class MetricRecord:
    objective: str
    family: str
    d_size: int
    latent_dim: int
    seed: int
    metric: str
    value: float


def _support(rng: random.Random, elements: list[float], d_size: int):
    if not 1 <= d_size <= len(elements):
        raise UsageError(
            f"d_size must be in [1, {len(elements)}], got {d_size}")
    return rng.sample(range(len(elements)), d_size)


def encoded_information(model, dataset: Dataset, d_size: int,
                        rng: random.Random) -> float:
    """Mean over classes of KL[q(c; D) || N(0, I)], one sampled D each."""
    if not dataset.classes:
        raise UsageError("dataset has no classes")
    total = 0.0
    for rec in dataset.classes:
        idx = _support(rng, rec.elements, d_size)
        q = model.encode_class([rec.elements[i] for i in idx])
        total += kl_to_standard_normal(q)
    return total / len(dataset.classes)


def fewshot_generation_nll(model, dataset: Dataset, d_size: int,
                           rng: random.Random, mc_outer: int = 20,
                           held_per_class: int = 10) -> float:
    """Mean over classes and held-out x' of -E_{c~q(c;D)} log p(x'|c).

    Per class, in class-id order, the draws are: support indices
    (rng.sample), held-out indices (rng.sample over the ascending
    remainder), then mc_outer latent noise vectors shared by that class's
    held-out points.
    """
    if not dataset.classes:
        raise UsageError("dataset has no classes")
    total = 0.0
    count = 0
    for rec in dataset.classes:
        n = len(rec.elements)
        if n <= d_size:
            raise UsageError(
                f"class {rec.class_id} has {n} elements; cannot hold out a "
                f"query beyond a support of {d_size}")
        d_idx = _support(rng, rec.elements, d_size)
        rest = [i for i in range(n) if i not in set(d_idx)]
        held = rng.sample(rest, min(held_per_class, len(rest)))
        q = model.encode_class([rec.elements[i] for i in d_idx])
        cs = [reparam_sample(q, draw_noise(rng, q.dim))
              for _ in range(mc_outer)]
        for i in held:
            x = rec.elements[i]
            avg = math.fsum(model.decode_logpdf(c, x) for c in cs) / mc_outer
            total -= avg
            count += 1
    return total / count


def predict_index(scores: list[float]) -> int:
    """Argmax with ties broken toward the lowest index."""
    if not scores:
        raise UsageError("cannot predict from no scores")
    best = 0
    for j in range(1, len(scores)):
        if scores[j] > scores[best]:
            best = j
    return best


def fewshot_classification_error(model, dataset: Dataset, d_size: int,
                                 n_way: int, episodes: int,
                                 rng: random.Random, mc_outer: int = 20,
                                 aggregate: str = "expected_likelihood") -> float:
    """Error rate over n_way episodes scored by the support posteriors.

    Per episode: candidate class ids (rng.sample), query slot
    (rng.randrange), then one support per candidate in that order, with the
    query element drawn from outside the query class's support immediately
    after that support, and finally mc_outer noise vectors per candidate.
    The default score is log mean_s p(x|c_s); "mean_log" averages
    log-likelihoods instead.
    """
    if aggregate not in AGGREGATES:
        raise UsageError(f"aggregate must be one of {AGGREGATES}")
    if episodes < 1:
        raise UsageError("episodes must be >= 1")
    if n_way > len(dataset.classes):
        raise UsageError(
            f"need {n_way} distinct classes, dataset has {len(dataset.classes)}")
    errors = 0
    for _ in range(episodes):
        ids = rng.sample(range(len(dataset.classes)), n_way)
        query_pos = rng.randrange(n_way)
        supports = []
        for cid in ids:
            rec = dataset.class_by_id(cid)
            idx = _support(rng, rec.elements, d_size)
            supports.append([rec.elements[i] for i in idx])
            if cid == ids[query_pos]:
                rest = [i for i in range(len(rec.elements))
                        if i not in set(idx)]
                if not rest:
                    raise UsageError(
                        f"class {cid} has no element left to query beyond "
                        f"a support of {d_size}")
                x = rec.elements[rest[rng.randrange(len(rest))]]
        scores = []
        for support in supports:
            q = model.encode_class(support)
            lps = []
            for _ in range(mc_outer):
                c = reparam_sample(q, draw_noise(rng, q.dim))
                lps.append(model.decode_logpdf(c, x))
            if aggregate == "expected_likelihood":
                scores.append(logsumexp(lps) - math.log(mc_outer))
            else:
                scores.append(math.fsum(lps) / mc_outer)
        if predict_index(scores) != query_pos:
            errors += 1
    return errors / episodes


def iw_joint_nll(model, xs: list[float], k: int, rng: random.Random) -> float:
    """Per-element NLL of the set xs via importance sampling from q(c; xs).

    -(1/|xs|) logmeanexp_s [log p(c_s) + sum_x log p(x|c_s) - log q(c_s)].
    With q equal to the exact posterior every weight equals p(xs), so the
    estimate is exact for any k.
    """
    if k < 1:
        raise UsageError("k must be >= 1")
    if not xs:
        raise UsageError("cannot evaluate an empty set")
    q = model.encode_class(xs)
    log_w = []
    for _ in range(k):
        c = reparam_sample(q, draw_noise(rng, q.dim))
        lw = standard_normal_logpdf(c) - gaussian_posterior_logpdf(q, c)
        for x in xs:
            lw = lw + model.decode_logpdf(c, x)
        log_w.append(lw)
    return -(logsumexp(log_w) - math.log(k)) / len(xs)


def quadrature_joint_nll(model, xs: list[float], nodes: int = 64) -> float:
    """Per-element NLL of xs by Gauss-Hermite quadrature over the latent.

    Exact up to quadrature error for 1- and 2-dimensional latents; higher
    dimensions are unsupported.
    """
    if not xs:
        raise UsageError("cannot evaluate an empty set")
    dim = model.encode_class(xs).dim
    points, log_weights = gauss_hermite(nodes)
    if dim == 1:
        terms = []
        for p, lw in zip(points, log_weights):
            terms.append(lw + math.fsum(model.decode_logpdf([p], x)
                                        for x in xs))
    elif dim == 2:
        terms = []
        for p1, lw1 in zip(points, log_weights):
            for p2, lw2 in zip(points, log_weights):
                terms.append(lw1 + lw2 + math.fsum(
                    model.decode_logpdf([p1, p2], x) for x in xs))
    else:
        raise UsageError(
            f"quadrature supports latent dimension 1 or 2, got {dim}")
    return -logsumexp(terms) / len(xs)


def exact_conjugate_logpX(hyper, xs: list[float]) -> float:
    """Closed-form log p(xs) for p(c)=N(m0, tau0^2), p(x|c)=N(c-shifted, sigma^2)."""
    if len(hyper) != 3:
        raise UsageError("hyper must be (m0, tau0, sigma)")
    m0, tau0, sigma = (float(v) for v in hyper)
    return exact_logpX(m0, tau0, sigma, xs)


def run_metric_suite(model, dataset: Dataset, config: EvalConfig,
                     objective: str) -> list[MetricRecord]:
    """All four metrics for one (model, dataset, d_size) cell.

    Each metric gets its own generator derived from config.seed, so adding
    or reordering metrics cannot perturb the others.
    """
    if not dataset.classes:
        raise UsageError("dataset has no classes")
    family = dataset.meta["family"]
    latent_dim = model.encode_class(dataset.classes[0].elements).dim

    def record(name, value):
        return MetricRecord(objective=objective, family=family,
                            d_size=config.d_size, latent_dim=latent_dim,
                            seed=config.seed, metric=name, value=value)

    rngs = [random.Random(config.seed * 4 + i) for i in range(4)]
    out = [record("encoded_information",
                  encoded_information(model, dataset, config.d_size, rngs[0]))]
    out.append(record("fewshot_generation_nll",
                      fewshot_generation_nll(
                          model, dataset, config.d_size, rngs[1],
                          mc_outer=config.mc_outer,
                          held_per_class=config.held_per_class)))
    episodes = config.episodes_per_class * len(dataset.classes)
    out.append(record("fewshot_classification_error",
                      fewshot_classification_error(
                          model, dataset, config.d_size, config.n_way,
                          episodes, rngs[2], mc_outer=config.mc_outer)))
    total = 0.0
    for rec in dataset.classes:
        total += iw_joint_nll(model, rec.elements, config.k, rngs[3])
    out.append(record("iw_joint_nll", total / len(dataset.classes)))
    return out


def write_metrics_csv(records: list[MetricRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER.split(","))
        for r in records:
            writer.writerow([r.objective, r.family, r.d_size, r.latent_dim,
                             r.seed, r.metric, f"{r.value:.17g}"])


def read_metrics_csv(path: str) -> list[MetricRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}:1: empty metrics file")
    if rows[0] != CSV_HEADER.split(","):
        raise ParseError(f"{path}:1: expected header {CSV_HEADER!r}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 7:
            raise ParseError(f"{path}:{lineno}: expected 7 fields, got {len(row)}")
        try:
            out.append(MetricRecord(
                objective=row[0], family=row[1], d_size=int(row[2]),
                latent_dim=int(row[3]), seed=int(row[4]), metric=row[5],
                value=float(row[6])))
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from None
    return out
