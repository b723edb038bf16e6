"""Synthetic 1D class-structured datasets.

Generation is a pure function of its arguments: one ``random.Random(seed)``
drives every draw in a fixed order, so the same call reproduces the same
dataset bit for bit.  Datasets persist as JSON lines (one meta line, then
one line per class); floats survive the round trip exactly because the
encoder emits shortest round-trip decimal strings.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from .dists import (
    DISCRETE,
    FAMILIES,
    GAMMA,
    GAUSSIAN,
    MIXTURE2,
    N_SYMBOLS,
    VON_MISES,
    FamilyParams,
    family_sample,
    validate_family_params,
)
from .errors import ConfigError, ParseError, UsageError

FLAT = "flat"
HIERARCHICAL = "hierarchical"
FACTORIAL = "factorial"

# Hyperprior defaults.  Classes must stay distinguishable from a handful of
# elements for few-shot metrics to mean anything, so separations are wide
# relative to within-class spread.
DEFAULT_HYPER = {
    GAUSSIAN: {"mean_std": 10.0, "scale": 1.0},
    MIXTURE2: {"center_std": 10.0, "separation": 4.0, "component_scale": 0.5},
    VON_MISES: {"conc": 2.0},
    GAMMA: {"shape_low": 1.0, "shape_high": 5.0, "rate": 1.0},
    DISCRETE: {},
}

# The four discrete class types: low half, high half, odds, evens.
DISCRETE_SUBSETS = (
    (1, 2, 3, 4),
    (5, 6, 7, 8),
    (1, 3, 5, 7),
    (2, 4, 6, 8),
)


@dataclass
class ClassRecord:
    """One class: its generating parameters and its sampled elements."""

    class_id: int
    true_params: FamilyParams
    elements: list[float]
    group_id: int | None = None
    content_id: int | None = None
    style_id: int | None = None


@dataclass
class Dataset:
    meta: dict
    classes: list[ClassRecord] = field(default_factory=list)

    def class_by_id(self, class_id: int) -> ClassRecord:
        if not 0 <= class_id < len(self.classes):
            raise UsageError(f"class_id {class_id} out of range")
        rec = self.classes[class_id]
        if rec.class_id != class_id:
            raise UsageError(f"class list out of order at {class_id}")
        return rec


@dataclass
class Episode:
    """A query element x plus a support subset drawn from the same class.

    ``d`` is sampled uniformly without replacement and independently of x,
    so x may or may not appear in it.  ``class_size`` records the true
    cardinality of the class the episode came from.
    """

    x: float
    d: list[float]
    class_size: int
    class_id: int
    x_index: int
    d_indices: list[int]


def _merge_hyper(family: str, hyper: dict | None) -> dict:
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}")
    merged = dict(DEFAULT_HYPER[family])
    for key, val in (hyper or {}).items():
        if key not in merged:
            raise ConfigError(f"unknown hyper key {key!r} for family {family!r}")
        merged[key] = float(val)
    _check_hyper(family, merged)
    return merged


def _check_hyper(family: str, h: dict) -> None:
    def positive(name):
        if not h[name] > 0.0:
            raise ConfigError(f"{family} hyper {name!r} must be positive, got {h[name]}")

    if family == GAUSSIAN:
        positive("mean_std")
        positive("scale")
    elif family == MIXTURE2:
        positive("center_std")
        positive("component_scale")
        if h["separation"] < 0.0:
            raise ConfigError("mixture2 separation must be >= 0")
    elif family == VON_MISES:
        if h["conc"] < 0.0:
            raise ConfigError("von Mises conc must be >= 0")
    elif family == GAMMA:
        positive("rate")
        if not 0.0 < h["shape_low"] <= h["shape_high"]:
            raise ConfigError("gamma needs 0 < shape_low <= shape_high")


def _draw_class_params(family: str, h: dict, rng: random.Random) -> FamilyParams:
    if family == GAUSSIAN:
        return FamilyParams(GAUSSIAN, {
            "mean": rng.gauss(0.0, h["mean_std"]), "scale": h["scale"]})
    if family == MIXTURE2:
        return FamilyParams(MIXTURE2, {
            "center": rng.gauss(0.0, h["center_std"]),
            "half_separation": 0.5 * h["separation"],
            "component_scale": h["component_scale"]})
    if family == VON_MISES:
        return FamilyParams(VON_MISES, {
            "loc": rng.uniform(-math.pi, math.pi), "conc": h["conc"]})
    if family == GAMMA:
        return FamilyParams(GAMMA, {
            "shape": rng.uniform(h["shape_low"], h["shape_high"]),
            "rate": h["rate"]})
    subset = DISCRETE_SUBSETS[rng.randrange(len(DISCRETE_SUBSETS))]
    probs = [0.0] * N_SYMBOLS
    for symbol in subset:
        probs[symbol - 1] = 1.0 / len(subset)
    return FamilyParams(DISCRETE, {"probs": probs})


def generate(family: str, n_classes: int, n_per_class: int, seed: int,
             hyper: dict | None = None) -> Dataset:
    """Draw class parameters from the family hyperprior, then elements i.i.d."""
    if n_classes < 1 or n_per_class < 1:
        raise UsageError("n_classes and n_per_class must be >= 1")
    h = _merge_hyper(family, hyper)
    rng = random.Random(seed)
    classes = []
    for cid in range(n_classes):
        params = _draw_class_params(family, h, rng)
        validate_family_params(params)
        elements = [family_sample(params, rng) for _ in range(n_per_class)]
        classes.append(ClassRecord(cid, params, elements))
    meta = {"family": family, "structure": FLAT, "seed": seed,
            "n_classes": n_classes, "n_per_class": n_per_class, "hyper": h}
    return Dataset(meta, classes)


def generate_hierarchical(n_groups: int, classes_per_group: int,
                          n_per_class: int, seed: int, *,
                          tau: float = 5.0, sigma_c: float = 1.0,
                          sigma_x: float = 0.5) -> Dataset:
    """Two-level Gaussian data: group mean, class mean around it, elements."""
    if n_groups < 1 or classes_per_group < 1 or n_per_class < 1:
        raise UsageError("all counts must be >= 1")
    if not (tau > 0.0 and sigma_c > 0.0 and sigma_x > 0.0):
        raise ConfigError("hierarchical scales must be positive")
    rng = random.Random(seed)
    classes = []
    for gid in range(n_groups):
        group_mean = rng.gauss(0.0, tau)
        for _ in range(classes_per_group):
            class_mean = rng.gauss(group_mean, sigma_c)
            params = FamilyParams(GAUSSIAN, {"mean": class_mean, "scale": sigma_x})
            elements = [rng.gauss(class_mean, sigma_x) for _ in range(n_per_class)]
            classes.append(ClassRecord(len(classes), params, elements, group_id=gid))
    meta = {"family": GAUSSIAN, "structure": HIERARCHICAL, "seed": seed,
            "n_classes": n_groups * classes_per_group, "n_per_class": n_per_class,
            "hyper": {"n_groups": n_groups, "classes_per_group": classes_per_group,
                      "tau": tau, "sigma_c": sigma_c, "sigma_x": sigma_x}}
    return Dataset(meta, classes)


def generate_factorial(n_contents: int, n_styles: int, n_per_cell: int,
                       seed: int, *, content_std: float = 5.0,
                       style_std: float = 2.0, scale: float = 0.3) -> Dataset:
    """Additive two-factor data: every (content, style) cell is one class."""
    if n_contents < 1 or n_styles < 1 or n_per_cell < 1:
        raise UsageError("all counts must be >= 1")
    if not (content_std > 0.0 and style_std > 0.0 and scale > 0.0):
        raise ConfigError("factorial scales must be positive")
    rng = random.Random(seed)
    content_means = [rng.gauss(0.0, content_std) for _ in range(n_contents)]
    style_offsets = [rng.gauss(0.0, style_std) for _ in range(n_styles)]
    classes = []
    for ci, mu in enumerate(content_means):
        for si, delta in enumerate(style_offsets):
            params = FamilyParams(GAUSSIAN, {"mean": mu + delta, "scale": scale})
            elements = [rng.gauss(mu + delta, scale) for _ in range(n_per_cell)]
            classes.append(ClassRecord(len(classes), params, elements,
                                       content_id=ci, style_id=si))
    meta = {"family": GAUSSIAN, "structure": FACTORIAL, "seed": seed,
            "n_classes": n_contents * n_styles, "n_per_class": n_per_cell,
            "hyper": {"n_contents": n_contents, "n_styles": n_styles,
                      "content_std": content_std, "style_std": style_std,
                      "scale": scale}}
    return Dataset(meta, classes)


def factor_elements(dataset: Dataset, factor: str, factor_id: int) -> list[float]:
    """All elements whose class carries the given group/content/style tag."""
    attr = {"group": "group_id", "content": "content_id", "style": "style_id"}.get(factor)
    if attr is None:
        raise UsageError(f"unknown factor {factor!r}")
    out = []
    for rec in dataset.classes:
        if getattr(rec, attr) == factor_id:
            out.extend(rec.elements)
    if not out:
        raise UsageError(f"no class tagged {factor}={factor_id}")
    return out


def sample_episode(dataset: Dataset, class_id: int, d_size: int,
                   rng: random.Random) -> Episode:
    """Uniform query x plus a without-replacement support subset of size d_size."""
    rec = dataset.class_by_id(class_id)
    n = len(rec.elements)
    if not 1 <= d_size <= n:
        raise UsageError(f"d_size must be in [1, {n}], got {d_size}")
    x_index = rng.randrange(n)
    d_indices = rng.sample(range(n), d_size)
    return Episode(x=rec.elements[x_index],
                   d=[rec.elements[i] for i in d_indices],
                   class_size=n, class_id=class_id,
                   x_index=x_index, d_indices=d_indices)


# ---------------------------------------------------------------------------
# Persistence


_META_KEYS = ("family", "structure", "seed", "n_classes", "n_per_class", "hyper")
_CLASS_KEYS = ("class_id", "true_params", "elements")


def save(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(dataset.meta, sort_keys=True) + "\n")
        for rec in dataset.classes:
            row = {"class_id": rec.class_id,
                   "true_params": {"family": rec.true_params.family,
                                   "values": rec.true_params.values},
                   "elements": rec.elements}
            for key in ("group_id", "content_id", "style_id"):
                val = getattr(rec, key)
                if val is not None:
                    row[key] = val
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _parse_line(path: str, lineno: int, line: str) -> dict:
    try:
        row = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(row, dict):
        raise ParseError(f"{path}:{lineno}: expected a JSON object")
    return row


def load(path: str) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}:1: empty dataset file")
    meta = _parse_line(path, 1, lines[0])
    for key in _META_KEYS:
        if key not in meta:
            raise ParseError(f"{path}:1: meta line missing {key!r}")
    classes = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise ParseError(f"{path}:{lineno}: blank line inside dataset")
        row = _parse_line(path, lineno, line)
        for key in _CLASS_KEYS:
            if key not in row:
                raise ParseError(f"{path}:{lineno}: class line missing {key!r}")
        tp = row["true_params"]
        if not isinstance(tp, dict) or "family" not in tp or "values" not in tp:
            raise ParseError(f"{path}:{lineno}: malformed true_params")
        rec = ClassRecord(class_id=row["class_id"],
                          true_params=FamilyParams(tp["family"], tp["values"]),
                          elements=row["elements"],
                          group_id=row.get("group_id"),
                          content_id=row.get("content_id"),
                          style_id=row.get("style_id"))
        if rec.class_id != len(classes):
            raise ParseError(
                f"{path}:{lineno}: class_id {rec.class_id}, expected {len(classes)}")
        if len(rec.elements) != meta["n_per_class"]:
            raise ParseError(
                f"{path}:{lineno}: {len(rec.elements)} elements, "
                f"meta says {meta['n_per_class']}")
        classes.append(rec)
    if len(classes) != meta["n_classes"]:
        raise ParseError(
            f"{path}:{len(lines)}: {len(classes)} classes, "
            f"meta says {meta['n_classes']} (truncated file?)")
    return Dataset(meta, classes)
