"""Reference models with closed-form posteriors and marginals.

These classes mirror the protocol of ``model.ModelView`` (encode/decode
methods, latent bookkeeping) but every posterior is the exact Bayes
posterior and every marginal likelihood has an analytic form, so they
serve as ground truth when checking bounds and estimators.

All latents are standard-normal a priori; conjugate scale/shift structure
lives in the decoder.  Marginals over a shared latent are rank-one-updated
Gaussians computed in pure Python; the hierarchical marginal builds its
full covariance with numpy.
"""

from __future__ import annotations

import math

import numpy as np

from .dists import GAUSSIAN, LOG_2PI, FamilyParams, GaussianPosterior
from .errors import UsageError

# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature against the standard normal measure


def gauss_hermite(nodes: int):
    """Points c_i and log-weights for E_{c~N(0,1)} f(c) ~ sum_i w_i f(c_i)."""
    if nodes < 1:
        raise UsageError("quadrature needs at least one node")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    points = [float(x) * math.sqrt(2.0) for x in t]
    log_weights = [float(math.log(wi)) - 0.5 * math.log(math.pi) for wi in w]
    return points, log_weights


# ---------------------------------------------------------------------------
# Shared-latent Gaussian marginal, rank-one form


def exact_logpX(m0: float, tau0: float, sigma: float, xs: list[float]) -> float:
    """log N(xs; m0*1, sigma^2 I + tau0^2 11^T) without building matrices.

    This is the marginal likelihood of x_j = m0 + tau0*c + sigma*eps_j with
    one shared standard-normal c.
    """
    n = len(xs)
    if n == 0:
        raise UsageError("marginal of an empty set")
    s2 = sigma * sigma
    t2 = tau0 * tau0
    d = [x - m0 for x in xs]
    sum_d = math.fsum(d)
    sum_d2 = math.fsum(v * v for v in d)
    denom = s2 + n * t2
    logdet = (n - 1) * math.log(s2) + math.log(denom)
    quad = (sum_d2 - t2 * sum_d * sum_d / denom) / s2
    return -0.5 * (n * LOG_2PI + logdet + quad)


class ConjugateModel:
    """p(c)=N(0,1), x = m0 + tau0*c + N(0, sigma^2); exact-posterior encoder."""

    def __init__(self, m0: float = 0.0, tau0: float = 1.0, sigma: float = 1.0):
        if sigma <= 0.0 or tau0 == 0.0:
            raise UsageError("need sigma > 0 and tau0 != 0")
        self.m0, self.tau0, self.sigma = float(m0), float(tau0), float(sigma)
        self.family = GAUSSIAN
        self.mode = "flat"
        self.latent_dim = 1
        self.meta = {"family": GAUSSIAN, "mode": "flat", "latent_dim": 1,
                     "z_sees_c": False}

    def encode_class(self, elements: list[float], a=None) -> GaussianPosterior:
        if not elements:
            raise UsageError("cannot condition on an empty support set")
        n = len(elements)
        s2 = self.sigma * self.sigma
        precision = 1.0 + n * self.tau0 * self.tau0 / s2
        mean = (self.tau0 * math.fsum(x - self.m0 for x in elements) / s2) / precision
        return GaussianPosterior([mean], [-math.log(precision)])

    def decode_params(self, c, z=None) -> FamilyParams:
        if z is not None:
            raise UsageError("no z branch on this model")
        return FamilyParams(GAUSSIAN, {"mean": self.m0 + self.tau0 * c[0],
                                       "scale": self.sigma})

    def decode_logpdf(self, c, x: float, z=None):
        fp = self.decode_params(c, z)
        d = x - fp.values["mean"]
        s2 = self.sigma * self.sigma
        return -0.5 * (LOG_2PI + math.log(s2)) - d * d / (2.0 * s2)

    def exact_logpX(self, xs: list[float]) -> float:
        return exact_logpX(self.m0, self.tau0, self.sigma, xs)

    def analytic_set_bound(self, q: GaussianPosterior, xs: list[float]) -> float:
        """Closed-form E_q[sum_x log p(x|c)] - KL(q || N(0,1)).

        No sampling: the Gaussian expectation of each squared residual is
        analytic, so this is the exact value of the set-level bound at q.
        """
        mu, lv = q.mean[0], q.log_var[0]
        v = math.exp(lv)
        s2 = self.sigma * self.sigma
        recon = 0.0
        for x in xs:
            d = x - self.m0 - self.tau0 * mu
            recon += -0.5 * (LOG_2PI + math.log(s2)) \
                - (d * d + self.tau0 * self.tau0 * v) / (2.0 * s2)
        kl = 0.5 * (v - lv + mu * mu - 1.0)
        return recon - kl


class ConjugateZModel:
    """c and per-element z, both N(0,1); x = w_c*c + w_z*z + N(0, sigma^2)."""

    def __init__(self, w_c: float = 1.0, w_z: float = 1.0, sigma: float = 0.5):
        if sigma <= 0.0:
            raise UsageError("need sigma > 0")
        self.w_c, self.w_z, self.sigma = float(w_c), float(w_z), float(sigma)
        self.family = GAUSSIAN
        self.mode = "latent_z"
        self.latent_dim = 1
        self.z_dim = 1
        self.meta = {"family": GAUSSIAN, "mode": "latent_z", "latent_dim": 1,
                     "z_sees_c": True}

    def _marginal_noise_var(self) -> float:
        return self.w_z * self.w_z + self.sigma * self.sigma

    def encode_class(self, elements: list[float], a=None) -> GaussianPosterior:
        if not elements:
            raise UsageError("cannot condition on an empty support set")
        n = len(elements)
        s2 = self._marginal_noise_var()
        precision = 1.0 + n * self.w_c * self.w_c / s2
        mean = (self.w_c * math.fsum(elements) / s2) / precision
        return GaussianPosterior([mean], [-math.log(precision)])

    def encode_z(self, x: float, c=None) -> GaussianPosterior:
        if c is None:
            raise UsageError("exact z posterior conditions on c")
        s2 = self.sigma * self.sigma
        precision = 1.0 + self.w_z * self.w_z / s2
        mean = (self.w_z * (x - self.w_c * c[0]) / s2) / precision
        return GaussianPosterior([mean], [-math.log(precision)])

    def decode_params(self, c, z=None) -> FamilyParams:
        if z is None:
            raise UsageError("this decoder needs z")
        return FamilyParams(GAUSSIAN, {
            "mean": self.w_c * c[0] + self.w_z * z[0], "scale": self.sigma})

    def decode_logpdf(self, c, x: float, z=None):
        fp = self.decode_params(c, z)
        d = x - fp.values["mean"]
        s2 = self.sigma * self.sigma
        return -0.5 * (LOG_2PI + math.log(s2)) - d * d / (2.0 * s2)

    def elementwise_logpdf_given_c(self, c: float, x: float) -> float:
        """log p(x | c) with z integrated out analytically."""
        s2 = self._marginal_noise_var()
        d = x - self.w_c * c
        return -0.5 * (LOG_2PI + math.log(s2)) - d * d / (2.0 * s2)

    def exact_logpX(self, xs: list[float]) -> float:
        return exact_logpX(0.0, self.w_c, math.sqrt(self._marginal_noise_var()), xs)


class ConjugateHierModel:
    """Two-level Gaussian: p(a)=N(0,1), c|a ~ N(tau*a, sigma_c^2),
    x|c ~ N(c, sigma_x^2).

    ``class_sizes`` fixes the group layout the exact group posterior assumes:
    encode_group expects the concatenation of whole classes in that order.
    """

    def __init__(self, tau: float, sigma_c: float, sigma_x: float,
                 class_sizes: list[int]):
        if min(tau, sigma_c, sigma_x) <= 0.0 or not class_sizes:
            raise UsageError("positive scales and a nonempty layout required")
        self.tau, self.sigma_c, self.sigma_x = float(tau), float(sigma_c), float(sigma_x)
        self.class_sizes = list(class_sizes)
        self.family = GAUSSIAN
        self.mode = "hierarchical"
        self.latent_dim = 1
        self.meta = {"family": GAUSSIAN, "mode": "hierarchical", "latent_dim": 1,
                     "z_sees_c": False}

    def encode_group(self, elements: list[float]) -> GaussianPosterior:
        if len(elements) != sum(self.class_sizes):
            raise UsageError("group support must concatenate the full classes")
        sx2 = self.sigma_x * self.sigma_x
        sc2 = self.sigma_c * self.sigma_c
        precision = 1.0
        weighted = 0.0
        pos = 0
        for n in self.class_sizes:
            xbar = math.fsum(elements[pos:pos + n]) / n
            pos += n
            var_i = sc2 + sx2 / n  # class mean given a, around tau*a
            precision += self.tau * self.tau / var_i
            weighted += self.tau * xbar / var_i
        return GaussianPosterior([weighted / precision], [-math.log(precision)])

    def encode_class(self, elements: list[float], a=None) -> GaussianPosterior:
        if not elements:
            raise UsageError("cannot condition on an empty support set")
        if a is None:
            raise UsageError("exact class posterior conditions on a")
        n = len(elements)
        sx2 = self.sigma_x * self.sigma_x
        sc2 = self.sigma_c * self.sigma_c
        precision = 1.0 / sc2 + n / sx2
        mean = (self.tau * a[0] / sc2 + math.fsum(elements) / sx2) / precision
        return GaussianPosterior([mean], [-math.log(precision)])

    def conditional_prior(self, a) -> GaussianPosterior:
        return GaussianPosterior([self.tau * a[0]],
                                 [2.0 * math.log(self.sigma_c)])

    def decode_params(self, c, z=None) -> FamilyParams:
        if z is not None:
            raise UsageError("no z branch on this model")
        return FamilyParams(GAUSSIAN, {"mean": c[0], "scale": self.sigma_x})

    def decode_logpdf(self, c, x: float, z=None):
        d = x - c[0]
        sx2 = self.sigma_x * self.sigma_x
        return -0.5 * (LOG_2PI + math.log(sx2)) - d * d / (2.0 * sx2)

    def exact_group_logpX(self, classes: list[list[float]]) -> float:
        return exact_group_logpX(self.tau, self.sigma_c, self.sigma_x, classes)


def exact_group_logpX(tau: float, sigma_c: float, sigma_x: float,
                      classes: list[list[float]]) -> float:
    """Exact log density of a whole group under the two-level Gaussian.

    Built the direct way: elements share tau^2 across the group, plus
    sigma_c^2 within a class, plus sigma_x^2 on the diagonal.
    """
    xs = [x for cls in classes for x in cls]
    n = len(xs)
    if n == 0:
        raise UsageError("marginal of an empty group")
    cov = np.full((n, n), tau * tau)
    pos = 0
    for cls in classes:
        k = len(cls)
        cov[pos:pos + k, pos:pos + k] += sigma_c * sigma_c
        pos += k
    cov[np.diag_indices(n)] += sigma_x * sigma_x
    vec = np.array(xs)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise UsageError("group covariance is not positive definite")
    quad = float(vec @ np.linalg.solve(cov, vec))
    return -0.5 * (n * LOG_2PI + logdet + quad)
