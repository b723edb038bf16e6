"""Linear-map encoders, decoders, and priors over a flat parameter vector.

A model is a named-slice view onto one flat list of floats, so the trainer
can treat parameters uniformly and checkpoints are a single JSON object.
``ModelView`` materializes the slices either as plain floats (evaluation) or
as tape leaves (training); every operation below accepts both.

Modes:
  flat          one class-level latent c
  hierarchical  group latent a above c, with a conditional prior p(c|a)
  factorial     two independent latents encoded from separate supports,
                decoded jointly from their concatenation
  latent_z      c plus a scalar per-element latent z on a linear-Gaussian
                observation model
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from . import adiff
from .dists import (
    DISCRETE,
    FAMILIES,
    GAMMA,
    GAUSSIAN,
    MIXTURE2,
    N_SYMBOLS,
    VON_MISES,
    FamilyParams,
    GaussianPosterior,
    family_logpdf,
    gaussian_posterior_logpdf,
    standard_normal_logpdf,
)
from .errors import ConfigError, ParseError, UsageError

FLAT = "flat"
HIERARCHICAL = "hierarchical"
FACTORIAL = "factorial"
LATENT_Z = "latent_z"
MODES = (FLAT, HIERARCHICAL, FACTORIAL, LATENT_Z)

# Decoder constants that mirror the data generator rather than being learned.
DEFAULT_FIXED = {
    MIXTURE2: {"half_separation": 2.0, "component_scale": 0.5},
    GAMMA: {"rate": 1.0},
}

_FEAT_DIM = {GAUSSIAN: 2, MIXTURE2: 2, GAMMA: 2, VON_MISES: 2, DISCRETE: N_SYMBOLS}


def feature_map(family: str, x: float) -> list[float]:
    """Per-element features: near-sufficient statistics under a linear head."""
    if family in (GAUSSIAN, MIXTURE2, GAMMA):
        return [x, x * x]
    if family == VON_MISES:
        return [math.cos(x), math.sin(x)]
    if family == DISCRETE:
        out = [0.0] * N_SYMBOLS
        out[int(round(x)) - 1] = 1.0
        return out
    raise ConfigError(f"unknown family {family!r}")


def pooled_features(family: str, elements: list[float]) -> list[float]:
    """Mean feature vector over a support set.

    fsum makes each coordinate the correctly rounded sum, so pooling is
    exactly invariant to the ordering of the support.
    """
    if not elements:
        raise UsageError("cannot pool an empty support set")
    feats = [feature_map(family, x) for x in elements]
    n = float(len(elements))
    return [math.fsum(col) / n for col in zip(*feats)]


@dataclass
class Model:
    """Flat parameter vector plus the named slices that give it structure."""

    meta: dict
    slices: dict
    values: list[float]

    @property
    def n_params(self) -> int:
        return len(self.values)

    def indices(self, names) -> list[int]:
        out = []
        for name in names:
            if name not in self.slices:
                raise UsageError(f"no parameter slice named {name!r}")
            lo, hi = self.slices[name]
            out.extend(range(lo, hi))
        return out

    def zero_(self) -> "Model":
        self.values = [0.0] * len(self.values)
        return self

    def set_slice(self, name: str, vals) -> None:
        lo, hi = self.slices[name]
        if len(vals) != hi - lo:
            raise UsageError(f"slice {name!r} expects {hi - lo} values")
        self.values[lo:hi] = [float(v) for v in vals]


def _layout(family: str, latent_dim: int, mode: str, z_sees_c: bool):
    """Slice names, sizes, and whether each is weight-like (random init)."""
    feat = _FEAT_DIM[family]
    lat = latent_dim
    rows = [("enc_w_mu", lat * feat, True), ("enc_b_mu", lat, False),
            ("enc_w_v", lat * feat, True), ("enc_b_v", lat, False)]
    if mode == HIERARCHICAL:
        rows += [("enc_u_mu", lat * lat, True), ("enc_u_v", lat * lat, True),
                 ("genc_w_mu", lat * feat, True), ("genc_b_mu", lat, False),
                 ("genc_w_v", lat * feat, True), ("genc_b_v", lat, False),
                 ("cond_w", lat * lat, True), ("cond_b", lat, False),
                 ("cond_log_var", lat, False)]
    if mode == FACTORIAL:
        rows += [("enc2_w_mu", lat * feat, True), ("enc2_b_mu", lat, False),
                 ("enc2_w_v", lat * feat, True), ("enc2_b_v", lat, False)]
    if mode == LATENT_Z:
        rows += [("zenc_w_mu", feat, True), ("zenc_b_mu", 1, False),
                 ("zenc_w_v", feat, True), ("zenc_b_v", 1, False)]
        if z_sees_c:
            rows += [("zenc_u_mu", lat, True), ("zenc_u_v", lat, True)]
        rows += [("dec_w_z", 1, True)]
    dec_in = 2 * lat if mode == FACTORIAL else lat
    if family == GAUSSIAN:
        rows += [("dec_w", dec_in, True), ("dec_b", 1, False),
                 ("dec_raw_scale", 1, False)]
    elif family == MIXTURE2:
        rows += [("dec_w", dec_in, True), ("dec_b", 1, False)]
    elif family == VON_MISES:
        rows += [("dec_w", 2 * dec_in, True), ("dec_b", 2, False),
                 ("dec_raw_conc", 1, False)]
    elif family == GAMMA:
        rows += [("dec_w", dec_in, True), ("dec_b", 1, False)]
    else:
        rows += [("dec_w", N_SYMBOLS * dec_in, True), ("dec_b", N_SYMBOLS, False)]
    return rows


def build_model(family: str, latent_dim: int = 2, mode: str = FLAT,
                seed: int = 0, fixed: dict | None = None,
                z_sees_c: bool = False) -> Model:
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if latent_dim < 1:
        raise ConfigError("latent_dim must be >= 1")
    if mode == LATENT_Z and family != GAUSSIAN:
        raise ConfigError("latent_z mode is defined on the gaussian family only")
    fx = dict(DEFAULT_FIXED.get(family, {}))
    for key, val in (fixed or {}).items():
        if key not in fx:
            raise ConfigError(f"no fixed decoder constant {key!r} for {family!r}")
        fx[key] = float(val)
    meta = {"family": family, "mode": mode, "latent_dim": latent_dim,
            "feat_dim": _FEAT_DIM[family], "z_sees_c": bool(z_sees_c),
            "fixed": fx, "init_seed": seed}
    rng = random.Random(seed)
    slices = {}
    values: list[float] = []
    for name, size, is_weight in _layout(family, latent_dim, mode, z_sees_c):
        lo = len(values)
        if is_weight:
            values.extend(rng.gauss(0.0, 0.01) for _ in range(size))
        else:
            values.extend([0.0] * size)
        slices[name] = (lo, len(values))
    return Model(meta, slices, values)


def _affine(w_flat, b, x):
    """Rows of w_flat applied to x, plus b; len(b) outputs."""
    in_dim = len(x)
    out = []
    for i, bi in enumerate(b):
        row = w_flat[i * in_dim:(i + 1) * in_dim]
        out.append(adiff.dot(row, x) + bi)
    return out


class ModelView:
    """Model parameters materialized as floats or as leaves of a tape."""

    def __init__(self, model: Model, tape=None):
        self.model = model
        self.meta = model.meta
        if tape is None:
            self._vals = model.values
        else:
            self._vals = [tape.leaf(v) for v in model.values]

    @property
    def family(self) -> str:
        return self.meta["family"]

    @property
    def mode(self) -> str:
        return self.meta["mode"]

    @property
    def latent_dim(self) -> int:
        return self.meta["latent_dim"]

    @property
    def z_dim(self) -> int:
        return 1 if self.mode == LATENT_Z else 0

    def vec(self, name: str):
        if name not in self.model.slices:
            raise UsageError(f"no parameter slice named {name!r}")
        lo, hi = self.model.slices[name]
        return self._vals[lo:hi]

    def scalar(self, name: str):
        vec = self.vec(name)
        if len(vec) != 1:
            raise UsageError(f"slice {name!r} is not a scalar")
        return vec[0]

    def _heads(self, prefix: str, elements: list[float], a=None):
        feats = pooled_features(self.family, elements)
        mu = _affine(self.vec(prefix + "_w_mu"), self.vec(prefix + "_b_mu"), feats)
        lv = _affine(self.vec(prefix + "_w_v"), self.vec(prefix + "_b_v"), feats)
        if a is not None:
            du = _affine(self.vec("enc_u_mu"), [0.0] * self.latent_dim, a)
            dv = _affine(self.vec("enc_u_v"), [0.0] * self.latent_dim, a)
            mu = [m + d for m, d in zip(mu, du)]
            lv = [v + d for v, d in zip(lv, dv)]
        return GaussianPosterior(mu, lv)

    def encode_class(self, elements: list[float], a=None) -> GaussianPosterior:
        if a is not None:
            if self.mode != HIERARCHICAL:
                raise ConfigError("conditioning on a group latent needs hierarchical mode")
            if len(a) != self.latent_dim:
                raise UsageError("group latent dimension mismatch")
        return self._heads("enc", elements, a)

    def encode_group(self, elements: list[float]) -> GaussianPosterior:
        if self.mode != HIERARCHICAL:
            raise ConfigError("group encoder exists only in hierarchical mode")
        return self._heads("genc", elements)

    def encode_factor(self, index: int, elements: list[float]) -> GaussianPosterior:
        if index == 0:
            return self._heads("enc", elements)
        if index == 1 and self.mode == FACTORIAL:
            return self._heads("enc2", elements)
        raise ConfigError(f"no encoder for factor {index} in mode {self.mode!r}")

    def encode_z(self, x: float, c=None) -> GaussianPosterior:
        if self.mode != LATENT_Z:
            raise ConfigError("per-element latent needs latent_z mode")
        feats = feature_map(self.family, x)
        mu = adiff.dot(self.vec("zenc_w_mu"), feats) + self.scalar("zenc_b_mu")
        lv = adiff.dot(self.vec("zenc_w_v"), feats) + self.scalar("zenc_b_v")
        if self.meta["z_sees_c"]:
            if c is None:
                raise UsageError("this model's z encoder conditions on c")
            mu = mu + adiff.dot(self.vec("zenc_u_mu"), c)
            lv = lv + adiff.dot(self.vec("zenc_u_v"), c)
        return GaussianPosterior([mu], [lv])

    def conditional_prior(self, a) -> GaussianPosterior:
        if self.mode != HIERARCHICAL:
            raise ConfigError("conditional prior exists only in hierarchical mode")
        mean = _affine(self.vec("cond_w"), self.vec("cond_b"), a)
        return GaussianPosterior(mean, list(self.vec("cond_log_var")))

    def decode_params(self, c, z=None) -> FamilyParams:
        dec_in = 2 * self.latent_dim if self.mode == FACTORIAL else self.latent_dim
        if len(c) != dec_in:
            raise UsageError(f"decoder expects latent of length {dec_in}, got {len(c)}")
        if z is not None and self.mode != LATENT_Z:
            raise UsageError("z given to a model without a z branch")
        if z is None and self.mode == LATENT_Z:
            raise UsageError("latent_z decoder needs z")
        fam = self.family
        fx = self.meta["fixed"]
        if fam == GAUSSIAN:
            mean = _affine(self.vec("dec_w"), self.vec("dec_b"), c)[0]
            if z is not None:
                mean = mean + self.scalar("dec_w_z") * z[0]
            return FamilyParams(GAUSSIAN, {
                "mean": mean, "scale": adiff.softplus(self.scalar("dec_raw_scale"))})
        if fam == MIXTURE2:
            center = _affine(self.vec("dec_w"), self.vec("dec_b"), c)[0]
            return FamilyParams(MIXTURE2, {
                "center": center, "half_separation": fx["half_separation"],
                "component_scale": fx["component_scale"]})
        if fam == VON_MISES:
            uv = _affine(self.vec("dec_w"), self.vec("dec_b"), c)
            return FamilyParams(VON_MISES, {
                "loc": adiff.atan2(uv[1], uv[0]),
                "conc": adiff.softplus(self.scalar("dec_raw_conc"))})
        if fam == GAMMA:
            raw = _affine(self.vec("dec_w"), self.vec("dec_b"), c)[0]
            return FamilyParams(GAMMA, {
                "shape": adiff.softplus(raw), "rate": fx["rate"]})
        logits = _affine(self.vec("dec_w"), self.vec("dec_b"), c)
        return FamilyParams(DISCRETE, {"logits": logits})

    def decode_logpdf(self, c, x: float, z=None):
        return family_logpdf(self.decode_params(c, z), x)


# Spec-level operation wrappers -------------------------------------------------


def encode_class(view: ModelView, elements: list[float],
                 a=None) -> GaussianPosterior:
    return view.encode_class(elements, a)


def decode_params(view: ModelView, c, z=None) -> FamilyParams:
    return view.decode_params(c, z)


def prior_logpdf(c):
    """Standard-normal log density of a latent point."""
    return standard_normal_logpdf(c)


def conditional_logpdf(view: ModelView, c, a):
    """log p(c | a) under the learned conditional prior."""
    return gaussian_posterior_logpdf(view.conditional_prior(a), c)


# Checkpoints -------------------------------------------------------------------


def save_model(model: Model, path: str) -> None:
    blob = {"meta": model.meta,
            "slices": {k: [lo, hi] for k, (lo, hi) in model.slices.items()},
            "values": model.values}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(blob, sort_keys=True))
        fh.write("\n")


def load_model(path: str) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        blob = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid checkpoint JSON ({exc.msg})") from exc
    for key in ("meta", "slices", "values"):
        if key not in blob:
            raise ParseError(f"{path}: checkpoint missing {key!r}")
    slices = {k: (lo, hi) for k, (lo, hi) in blob["slices"].items()}
    values = [float(v) for v in blob["values"]]
    covered = sorted(slices.values())
    pos = 0
    for lo, hi in covered:
        if lo != pos or hi < lo:
            raise ParseError(f"{path}: checkpoint slices are not contiguous")
        pos = hi
    if pos != len(values):
        raise ParseError(f"{path}: slice extent {pos} != {len(values)} values")
    return Model(blob["meta"], slices, values)
