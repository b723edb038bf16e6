"""The five 1D observation families and the Gaussian latent machinery.

Every log-density here accepts parameter values that are either plain
floats or tape Vars (see adiff); the arithmetic is identical in both
modes, so a density evaluated on constants matches the same density
recorded on a tape bit for bit.

Families and parameter records:
  gaussian   mean, scale
  mixture2   center, half_separation, component_scale  (components at
             center +- half_separation, equal weights)
  von_mises  loc, conc                                  (support (-pi, pi])
  gamma      shape, rate                                (support x > 0)
  discrete   probs (length 8) or logits (length 8)      (support {1..8})
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import adiff
from .adiff import Var, value_of
from .errors import DomainError, UsageError

GAUSSIAN = "gaussian"
MIXTURE2 = "mixture2"
VON_MISES = "von_mises"
GAMMA = "gamma"
DISCRETE = "discrete"
FAMILIES = (GAUSSIAN, MIXTURE2, VON_MISES, GAMMA, DISCRETE)

N_SYMBOLS = 8
LOG_2PI = math.log(2.0 * math.pi)
TWO_PI = 2.0 * math.pi


@dataclass
class FamilyParams:
    family: str
    values: dict = field(default_factory=dict)

    def value_floats(self) -> dict:
        out = {}
        for k, v in self.values.items():
            if isinstance(v, (list, tuple)):
                out[k] = [value_of(u) for u in v]
            else:
                out[k] = value_of(v)
        return out


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian given by per-dimension mean and log variance."""

    mean: list
    log_var: list

    def __post_init__(self):
        if len(self.mean) != len(self.log_var):
            raise UsageError("mean/log_var dimension mismatch")

    @property
    def dim(self) -> int:
        return len(self.mean)


def validate_family_params(fp: FamilyParams) -> None:
    """Check float-valued parameter records; raises DomainError."""
    v = fp.value_floats()
    fam = fp.family
    if fam == GAUSSIAN:
        if not v["scale"] > 0.0:
            raise DomainError(f"gaussian scale must be positive, got {v['scale']}")
    elif fam == MIXTURE2:
        if not v["component_scale"] > 0.0:
            raise DomainError("mixture2 component_scale must be positive")
        if not v["half_separation"] >= 0.0:
            raise DomainError("mixture2 half_separation must be >= 0")
    elif fam == VON_MISES:
        if not v["conc"] >= 0.0:
            raise DomainError("von Mises concentration must be >= 0")
    elif fam == GAMMA:
        if not (v["shape"] > 0.0 and v["rate"] > 0.0):
            raise DomainError("gamma shape and rate must be positive")
    elif fam == DISCRETE:
        probs = v.get("probs")
        if probs is not None:
            if len(probs) != N_SYMBOLS:
                raise DomainError(f"discrete needs {N_SYMBOLS} masses")
            if any(p < 0.0 for p in probs):
                raise DomainError("discrete masses must be non-negative")
            if abs(math.fsum(probs) - 1.0) > 1e-12:
                raise DomainError("discrete masses must sum to 1")
        elif "logits" not in v:
            raise DomainError("discrete needs probs or logits")
    else:
        raise DomainError(f"unknown family {fam!r}")


def _gauss_logpdf(x: float, mean, scale):
    d = x - mean
    return -0.5 * LOG_2PI - adiff.log(scale) - d * d / (2.0 * scale * scale)


def _check_symbol(x: float) -> int:
    k = int(round(x))
    if k != x or not 1 <= k <= N_SYMBOLS:
        raise DomainError(f"discrete support is integers 1..{N_SYMBOLS}, got {x!r}")
    return k


def family_logpdf(fp: FamilyParams, x: float):
    """log p(x | params). Params may be floats or Vars; x is a float."""
    fam = fp.family
    v = fp.values
    if fam == GAUSSIAN:
        return _gauss_logpdf(x, v["mean"], v["scale"])
    if fam == MIXTURE2:
        c = v["center"]
        h = v["half_separation"]
        s = v["component_scale"]
        lo = _gauss_logpdf(x, c - h, s)
        hi = _gauss_logpdf(x, c + h, s)
        return adiff.logaddexp(lo, hi) + math.log(0.5)
    if fam == VON_MISES:
        if not -math.pi < x <= math.pi:
            raise DomainError(f"von Mises support is (-pi, pi], got {x!r}")
        kappa = v["conc"]
        return kappa * adiff.cos(x - v["loc"]) - LOG_2PI - adiff.log_bessel_i0(kappa)
    if fam == GAMMA:
        if not x > 0.0:
            raise DomainError(f"gamma support is x > 0, got {x!r}")
        a = v["shape"]
        b = v["rate"]
        return a * adiff.log(b) + (a - 1.0) * math.log(x) - b * x - adiff.lgamma(a)
    if fam == DISCRETE:
        k = _check_symbol(x)
        probs = v.get("probs")
        if probs is not None:
            p = probs[k - 1]
            pv = value_of(p)
            if pv == 0.0:
                return -math.inf
            return adiff.log(p)
        logits = v["logits"]
        return logits[k - 1] - adiff.logsumexp(logits)
    raise DomainError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# sampling (float parameters only)


def _sample_std_gamma(shape: float, rng) -> float:
    """Marsaglia-Tsang squeeze sampler for Gamma(shape, 1)."""
    if shape < 1.0:
        # boost: draw at shape+1 and scale by a uniform power
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return _sample_std_gamma(shape + 1.0, rng) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.gauss(0.0, 1.0)
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = rng.random()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if u > 0.0 and math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def wrap_angle(v: float) -> float:
    """Wrap into (-pi, pi]."""
    w = math.remainder(v, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


def family_sample(fp: FamilyParams, rng) -> float:
    fam = fp.family
    v = fp.value_floats()
    if fam == GAUSSIAN:
        return rng.gauss(v["mean"], v["scale"])
    if fam == MIXTURE2:
        side = -1.0 if rng.random() < 0.5 else 1.0
        return rng.gauss(v["center"] + side * v["half_separation"], v["component_scale"])
    if fam == VON_MISES:
        # stdlib vonmisesvariate implements the wrapped-Cauchy rejection
        # sampler; its output lives in [0, 2pi), wrap onto the support
        return wrap_angle(rng.vonmisesvariate(v["loc"], v["conc"]))
    if fam == GAMMA:
        return _sample_std_gamma(v["shape"], rng) / v["rate"]
    if fam == DISCRETE:
        probs = v["probs"]
        u = rng.random()
        acc = 0.0
        for k, p in enumerate(probs, start=1):
            acc += p
            if u < acc:
                return float(k)
        return float(N_SYMBOLS)
    raise DomainError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# Gaussian latent machinery


def gaussian_kl(q: GaussianPosterior, p: GaussianPosterior):
    """KL(q || p) for diagonal Gaussians:
    sum_i [ log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2 ].
    """
    if q.dim != p.dim:
        raise UsageError(f"KL dimension mismatch: {q.dim} vs {p.dim}")
    total = None
    for mq, lvq, mp_, lvp in zip(q.mean, q.log_var, p.mean, p.log_var):
        dm = mq - mp_
        term = 0.5 * (lvp - lvq) + (adiff.exp(lvq) + dm * dm) / (2.0 * adiff.exp(lvp)) - 0.5
        total = term if total is None else total + term
    return total


def kl_to_standard_normal(q: GaussianPosterior):
    """KL(q || N(0, I)); exactly 0 at mean 0, log-variance 0."""
    total = None
    for mq, lvq in zip(q.mean, q.log_var):
        term = 0.5 * (adiff.exp(lvq) - lvq + mq * mq - 1.0)
        total = term if total is None else total + term
    return total


def reparam_sample(q: GaussianPosterior, noise) -> list:
    """mean + exp(log_var / 2) * noise, elementwise."""
    if len(noise) != q.dim:
        raise UsageError("noise dimension mismatch")
    return [m + adiff.exp(0.5 * lv) * e for m, lv, e in zip(q.mean, q.log_var, noise)]


def gaussian_posterior_logpdf(q: GaussianPosterior, c):
    """log q(c); accepts float or Var entries on either side."""
    total = 0.0
    for ci, m, lv in zip(c, q.mean, q.log_var):
        d = ci - m
        total = total + (-0.5 * (LOG_2PI + lv) - d * d / (2.0 * adiff.exp(lv)))
    return total


def standard_normal_logpdf(c) -> float:
    total = 0.0
    for ci in c:
        total += -0.5 * (LOG_2PI + ci * ci)
    return total


def draw_noise(rng, dim: int) -> list[float]:
    return [rng.gauss(0.0, 1.0) for _ in range(dim)]
