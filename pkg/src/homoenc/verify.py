"""Runtime self-check suites runnable from the command line.

Re-derives the package's core guarantees on small fixed seeds: gradient
exactness against finite differences, special-function accuracy, the
algebraic identities tying the loss family together, Monte Carlo bound
validity against closed-form marginals, and estimator exactness. Every
check reports a measured value next to the tolerance it must stay
under, so a fresh install can be vetted in a few seconds without the
test suite.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass

from .adiff import Tape, grad_check, lgamma, log_bessel_i0, softplus, value_of
from .dists import (
    FamilyParams,
    GaussianPosterior,
    draw_noise,
    family_logpdf,
    gaussian_kl,
    kl_to_standard_normal,
)
from .errors import UsageError
from .eval import (
    encoded_information,
    fewshot_generation_nll,
    iw_joint_nll,
    quadrature_joint_nll,
)
from .model import ModelView, build_model
from .objectives import (
    ObjectiveSpec,
    build_aux,
    log_binomial,
    loss_hierarchical,
    loss_ns,
    loss_resample,
    loss_rescale,
    loss_structured,
    loss_tightened,
    loss_vae,
    loss_vhe,
    loss_vhe_z,
)
from .oracles import ConjugateModel, gauss_hermite
from .synthdata import Episode, generate


@dataclass
class PropertyResult:
    """One named check: passes when value <= tolerance."""

    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool


def _result(suite: str, name: str, value, tolerance) -> PropertyResult:
    v = float(value)
    t = float(tolerance)
    return PropertyResult(suite, name, v, t, v <= t)


def _episode(x, d, class_size, d_idx=None):
    idx = d_idx if d_idx is not None else list(range(len(d)))
    return Episode(x=x, d=list(d), class_size=class_size, class_id=0,
                   x_index=0, d_indices=idx)


# --- gradients: reverse-mode agrees with central finite differences ----

def _grad_case(build) -> float:
    tape = Tape()
    point = build(tape)
    return grad_check(tape, point, h=1e-4)


def suite_gradients() -> list[PropertyResult]:
    out = []
    tol = 1e-5

    def flat_case(family, x, d, kind):
        def build(tape):
            model = build_model(family, seed=hash((family, kind)) % 1000)
            if family == "von_mises":
                # keep the direction vector away from the atan2 singularity,
                # where finite differences lose several digits
                model.set_slice("dec_b", [0.9, 0.4])
            view = ModelView(model, tape)
            rng = random.Random(9)
            if kind == "vae":
                loss_vae(view, x, rng)
            elif kind == "vhe":
                loss_vhe(view, _episode(x, d, 12), rng,
                         ObjectiveSpec("vhe", mc_samples=2))
            elif kind == "ns":
                loss_ns(view, d, rng)
            elif kind == "resample":
                loss_resample(view, _episode(x, d, 12), rng)
            else:
                loss_rescale(view, d[0], d, 12, rng)
            return model.values
        return build

    for family, x, d in (("gaussian", 0.7, [0.2, -1.1, 0.5]),
                         ("mixture2", 1.4, [0.3, -0.8]),
                         ("von_mises", 0.9, [-2.0, 1.2, 0.4]),
                         ("gamma", 1.7, [0.5, 2.2]),
                         ("discrete", 3.0, [1.0, 5.0, 8.0])):
        out.append(_result("gradients", f"vhe_{family}",
                           _grad_case(flat_case(family, x, d, "vhe")), tol))
    for kind in ("vae", "ns", "resample", "rescale"):
        out.append(_result("gradients", f"{kind}_gaussian",
                           _grad_case(flat_case("gaussian", 0.7,
                                                [0.2, -1.1, 0.5], kind)), tol))

    def z_case(z_sees_c):
        def build(tape):
            model = build_model("gaussian", latent_dim=2, mode="latent_z",
                                seed=73, z_sees_c=z_sees_c)
            view = ModelView(model, tape)
            loss_vhe_z(view, _episode(0.4, [0.1, 0.8], 9), random.Random(10))
            return model.values
        return build

    out.append(_result("gradients", "vhe_z_plain",
                       _grad_case(z_case(False)), tol))
    out.append(_result("gradients", "vhe_z_conditioned",
                       _grad_case(z_case(True)), tol))

    def hier_case(tape):
        model = build_model("gaussian", mode="hierarchical", seed=79)
        view = ModelView(model, tape)
        loss_hierarchical(view, 0.4, [0.1, 0.5, -0.2], [0.2, 0.3], 30, 10,
                          random.Random(11),
                          ObjectiveSpec("hierarchical", mc_samples=2))
        return model.values

    out.append(_result("gradients", "hierarchical_gaussian",
                       _grad_case(hier_case), tol))

    def fact_case(tape):
        model = build_model("gaussian", mode="factorial", seed=83)
        view = ModelView(model, tape)
        loss_structured(view, 0.4, [([0.1, 0.5], 60), ([0.2], 80)],
                        random.Random(12))
        return model.values

    out.append(_result("gradients", "structured_two_factor",
                       _grad_case(fact_case), tol))

    def tight_case(tape):
        model = build_model("gaussian", seed=89)
        aux = build_aux(2, {0: 5}, seed=97)
        view = ModelView(model, tape)
        aux_view = ModelView(aux, tape)
        full = [0.5, -1.0, 2.0, 0.1, 0.9]
        loss_tightened(view, aux_view,
                       _episode(full[1], [full[1], full[3]], 5, d_idx=[1, 3]),
                       full, random.Random(13))
        return model.values + aux.values

    out.append(_result("gradients", "tightened_with_aux",
                       _grad_case(tight_case), tol))
    return out


# --- special: scalar kernels against closed forms and references -------

# log I0(kappa) at 40 decimal digits, rounded to double
_LOG_I0_REFS = (
    (0.5, 0.061549719185481303941),
    (2.0, 0.82399354148295628293),
    (10.0, 7.9429720831186955545),
    (500.0, 495.97400766810669646),
)


def suite_special() -> list[PropertyResult]:
    out = []

    pts, log_ws = gauss_hermite(64)
    m = max(log_ws)
    norm = m + math.log(math.fsum(math.exp(lw - m) for lw in log_ws))
    out.append(_result("special", "quadrature_weight_normalization",
                       abs(norm), 1e-12))
    second = math.fsum(math.exp(lw) * p * p for p, lw in zip(pts, log_ws))
    out.append(_result("special", "quadrature_gaussian_second_moment",
                       abs(second - 1.0), 1e-10))

    err = max(abs(value_of(log_bessel_i0(k)) - ref) / max(1.0, abs(ref))
              for k, ref in _LOG_I0_REFS)
    out.append(_result("special", "log_bessel_i0_reference", err, 1e-14))

    # trapezoid rule on a periodic integrand converges spectrally, so the
    # density must integrate to one almost exactly
    fp = FamilyParams("von_mises", {"loc": 0.7, "conc": 3.5})
    n = 512
    total = math.fsum(
        math.exp(value_of(family_logpdf(fp,
                                        -math.pi + 2.0 * math.pi * (i + 1) / n)))
        for i in range(n)) * (2.0 * math.pi / n)
    out.append(_result("special", "von_mises_normalization",
                       abs(total - 1.0), 1e-10))

    x = 3.7
    out.append(_result("special", "softplus_difference_identity",
                       abs(value_of(softplus(x)) - value_of(softplus(-x)) - x),
                       1e-12))
    y = 2.3
    out.append(_result("special", "lgamma_recurrence",
                       abs(value_of(lgamma(y + 1.0)) - value_of(lgamma(y))
                           - math.log(y)), 1e-12))

    q = GaussianPosterior([0.3, -0.2], [0.1, -0.4])
    out.append(_result("special", "gaussian_kl_self_zero",
                       abs(gaussian_kl(q, q)), 0.0))
    unit = GaussianPosterior([1.0], [0.0])
    out.append(_result("special", "kl_unit_mean_shift",
                       abs(kl_to_standard_normal(unit) - 0.5), 1e-15))
    return out


# --- identities: the loss family collapses onto itself -----------------

def suite_identities() -> list[PropertyResult]:
    out = []

    view = ModelView(build_model("gaussian", seed=5))
    x = 0.7
    vae = loss_vae(view, x, random.Random(7))
    sing = _episode(x, [x], 1)
    diffs = []
    for fn in (lambda: loss_vhe(view, sing, random.Random(7)),
               lambda: loss_resample(view, sing, random.Random(7)),
               lambda: loss_rescale(view, x, [x], 1, random.Random(7))):
        other = fn()
        diffs.append(abs(other.total - vae.total))
        diffs.append(abs(other.recon - vae.recon))
    out.append(_result("identities", "vae_singleton_chain", max(diffs), 0.0))

    rng = random.Random(11)
    full = [rng.gauss(0, 1.3) for _ in range(8)]
    d = full[:3]
    view2 = ModelView(build_model("gaussian", seed=6))
    lhs = math.fsum(
        loss_rescale(view2, xi, d, 8, random.Random(5)).total for xi in d)
    ns = loss_ns(view2, d, random.Random(5))
    rhs = ns.total - (1.0 - 3.0 / 8.0) * ns.kl_c
    out.append(_result("identities", "ns_rescale_decomposition",
                       abs(lhs - rhs), 1e-10))

    a = loss_ns(view2, [0.8], random.Random(3))
    b = loss_vae(view2, 0.8, random.Random(3))
    out.append(_result("identities", "ns_singleton_equals_vae",
                       abs(a.total - b.total), 1e-15))

    hier = build_model("gaussian", mode="hierarchical", seed=0).zero_()
    hier.set_slice("dec_b", [1.2])
    hview = ModelView(hier)
    rng_h = random.Random(42)
    hl = loss_hierarchical(hview, 0.5, [0.1] * 4, [0.2] * 3, 1000, 100, rng_h)
    rng_v = random.Random(42)
    draw_noise(rng_v, 2)
    fl = loss_vhe(hview, _episode(0.5, [0.2] * 3, 100), rng_v)
    out.append(_result("identities", "hierarchical_flat_prior_reduction",
                       abs(value_of(hl.total) - value_of(fl.total)), 1e-12))

    model = ConjugateModel(0.0, 1.0, 0.8)
    rng = random.Random(13)
    full = [rng.gauss(0, 1.2) for _ in range(9)]
    aux = build_aux(1, {0: 9}, seed=0)
    aux.set_slice("psi_w", [0.0])
    episode = _episode(full[2], [full[2], full[5], full[7]], 9,
                       d_idx=[2, 5, 7])
    tight = loss_tightened(model, ModelView(aux), episode, full,
                           random.Random(21))
    plain = loss_vhe(model, episode, random.Random(21))
    const = 3 * math.log(9.0) - log_binomial(9, 3)
    out.append(_result("identities", "tightened_uniform_constant_shift",
                       abs(tight.total - (plain.total + const / 9.0)), 1e-10))

    aux1 = build_aux(1, {0: 4}, seed=0)
    aux1.set_slice("psi_w", [0.0])
    full4 = [0.5, -1.0, 2.0, 0.1]
    ep1 = _episode(full4[1], [full4[1]], 4, d_idx=[1])
    t1 = loss_tightened(model, ModelView(aux1), ep1, full4, random.Random(2))
    p1 = loss_vhe(model, ep1, random.Random(2))
    out.append(_result("identities", "tightened_singleton_support",
                       max(abs(t1.subset_cost), abs(t1.total - p1.total)),
                       1e-12))

    zero = ModelView(build_model("gaussian", seed=0).zero_())
    e = _episode(0.4, [0.4, 0.6], 50)
    one = loss_vhe(zero, e, random.Random(3), ObjectiveSpec("vhe"))
    three = loss_vhe(zero, e, random.Random(3),
                     ObjectiveSpec("vhe", mc_samples=3))
    out.append(_result("identities", "mc_sample_invariance_flat_decoder",
                       abs(one.total - three.total), 1e-12))
    return out


# --- bounds: negated losses stay below exact log marginals -------------

def _gap(samples, truth):
    mean = statistics.mean(samples)
    se = statistics.stdev(samples) / math.sqrt(len(samples))
    return mean - truth, 3.0 * se


def suite_bounds() -> list[PropertyResult]:
    out = []

    model = ConjugateModel(0.0, 1.0, 0.6)
    rng = random.Random(19)
    c = rng.gauss(0, 1)
    full = [model.tau0 * c + rng.gauss(0, model.sigma) for _ in range(6)]
    truth = model.exact_logpX(full) / 6.0
    samples = [-loss_vhe(model, _episode(full[k % 6], full, 6), rng).total
               for k in range(1500)]
    gap, slack = _gap(samples, truth)
    out.append(_result("bounds", "vhe_below_exact_marginal", gap, slack))

    q = model.encode_class(full)
    analytic = model.analytic_set_bound(q, full)
    out.append(_result("bounds", "ns_analytic_below_exact",
                       analytic - model.exact_logpX(full), 0.0))
    ns_samples = [-loss_ns(model, full, rng).total for _ in range(1200)]
    ns_gap, ns_slack = _gap([s - analytic for s in ns_samples], 0.0)
    out.append(_result("bounds", "ns_estimate_matches_analytic",
                       abs(ns_gap), ns_slack))

    kls = []
    rng = random.Random(23)
    for mode, kind in (("flat", "vhe"), ("latent_z", "vhe_z")):
        view = ModelView(build_model("gaussian", mode=mode, seed=31))
        for _ in range(15):
            d = [rng.gauss(0, 1) for _ in range(3)]
            e = _episode(rng.gauss(0, 1), d, 10)
            breakdown = (loss_vhe(view, e, rng) if kind == "vhe"
                         else loss_vhe_z(view, e, rng))
            kls.append(value_of(breakdown.kl_c))
            if breakdown.kl_z is not None:
                kls.append(value_of(breakdown.kl_z))
    out.append(_result("bounds", "kl_terms_nonnegative", -min(kls), 1e-12))
    return out


# --- estimators: evaluation metrics hit their closed forms -------------

def suite_estimators() -> list[PropertyResult]:
    out = []

    model = ConjugateModel(0.0, 1.0, 0.7)
    rng = random.Random(3)
    xs = [rng.gauss(0, 1.2) for _ in range(5)]
    exact = -model.exact_logpX(xs) / len(xs)
    err = max(abs(iw_joint_nll(model, xs, k, random.Random(40 + k)) - exact)
              for k in (1, 64))
    out.append(_result("estimators", "iw_exact_posterior_any_k", err, 1e-10))

    out.append(_result("estimators", "quadrature_matches_exact",
                       abs(quadrature_joint_nll(model, xs, nodes=128) - exact),
                       1e-9))

    view = ModelView(build_model("gaussian", latent_dim=1, seed=17))
    diffs = []
    for s in range(60):
        lo = iw_joint_nll(view, xs, 1, random.Random(1000 + s))
        hi = iw_joint_nll(view, xs, 50, random.Random(5000 + s))
        diffs.append(lo - hi)  # NLL must not increase with k
    mean = statistics.mean(diffs)
    se = statistics.stdev(diffs) / math.sqrt(len(diffs))
    out.append(_result("estimators", "iw_monotone_in_k", -mean, 3.0 * se))

    data = generate("gaussian", 4, 8, seed=0)
    zero = ModelView(build_model("gaussian", latent_dim=1, seed=0).zero_())
    got = fewshot_generation_nll(zero, data, 3, random.Random(6), mc_outer=2,
                                 held_per_class=4)
    # a zeroed decoder scores every point with the same constant density,
    # so the metric must equal the plain average over the same held points
    scale = math.log(2.0)  # softplus(0)
    rng = random.Random(6)
    refs = []
    for rec in data.classes:
        d_idx = set(rng.sample(range(len(rec.elements)), 3))
        rest = [i for i in range(len(rec.elements)) if i not in d_idx]
        held = rng.sample(rest, 4)
        for _ in range(2):
            draw_noise(rng, 1)
        for i in held:
            z = rec.elements[i] / scale
            refs.append(0.5 * math.log(2.0 * math.pi) + math.log(scale)
                        + 0.5 * z * z)
    out.append(_result("estimators", "generation_nll_constant_decoder",
                       abs(got - statistics.mean(refs)), 1e-12))

    out.append(_result("estimators", "encoded_information_zero_model",
                       abs(encoded_information(zero, data, 3,
                                               random.Random(8))), 0.0))
    return out


SUITES = {
    "gradients": suite_gradients,
    "special": suite_special,
    "identities": suite_identities,
    "bounds": suite_bounds,
    "estimators": suite_estimators,
}


def run_suites(names=None) -> list[PropertyResult]:
    """Run the named suites (all by default), in declaration order."""
    if names is None:
        names = list(SUITES)
    results = []
    for name in names:
        if name not in SUITES:
            raise UsageError(
                f"unknown suite {name!r}; valid: {', '.join(SUITES)}")
        results.extend(SUITES[name]())
    return results
