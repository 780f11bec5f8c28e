"""Tilted measures and cumulant-generating functions of a (Q, W, rho) triple.

The central object is :class:`TiltedFamily`, which holds the rho-tilted output law f_rho,
the posterior P^rho_{X|Y}, the tilted pair law P^rho_{XY} and the triple laws P_XYZ and its
restriction to the joint support. Two cumulant-generating functions are derived from it:

- :class:`ScalarCgf`, Lambda_rho(lam) = log E[(f_rho(Y)/W(Y|X))^lam] under Q x W;
- :class:`VectorCgf`, Lambda_{1,rho}(v) = log E[exp(v . A)] under the restricted triple law, with
  A = [log W(Y|X)/f_rho(Y), log W(Y|Z)/W(Y|X)].

For singular pairs the second coordinate of A vanishes and Lambda_{1,rho} restricted to its first
argument is the singular-case CGF Lambda_o.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.special import logsumexp, softmax, xlogy

from rcbound.channel import check_dimensions, classify_pair, support_masks, support_sets
from rcbound.concentration import DiscreteLaw, VectorLaw
from rcbound.domain import tablestorage as ts
from rcbound.errors import EmptySupportError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from rcbound.channel import Channel, InputDistribution, SupportSets

_log = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-9


def _log_or_neg_inf(values: NDArray) -> NDArray:
    with np.errstate(divide="ignore"):
        return np.log(values)


class TiltedFamily:
    """All tilted measures of one (Q, W, rho).

    Args:
        channel: The channel W.
        q: The input distribution Q.
        rho: Tilt parameter, rho >= 0.
    """

    def __init__(self, channel: Channel, q: InputDistribution, rho: float):
        if rho < 0:
            msg = f"rho must be nonnegative, got {rho}."
            raise ValueError(msg)
        check_dimensions(channel, q)
        self._channel = channel
        self._q = q
        self._rho = float(rho)
        self._pair_mask, self._triple_mask = support_masks(channel, q)
        self._sets: SupportSets | None = None
        if not np.any(self._pair_mask):
            msg = f"The support of Q x W is empty for {channel.name}."
            raise EmptySupportError(msg)

        s = 1.0 / (1.0 + self._rho)
        mask = self._pair_mask
        log_w = _log_or_neg_inf(channel.w)
        log_q = _log_or_neg_inf(q.q)
        terms = np.where(mask, log_q[:, None] + s * np.where(mask, log_w, 0.0), -np.inf)
        log_h = logsumexp(terms, axis=0)
        reachable = np.isfinite(log_h)

        scaled = (1.0 + self._rho) * log_h
        self._log_f = scaled - logsumexp(scaled[reachable])
        self._f = np.exp(self._log_f)
        self._log_h = log_h
        self._p_x_given_y = np.where(mask, np.exp(terms - np.where(reachable, log_h, 0.0)[None, :]), 0.0)
        self._p_xy = self._p_x_given_y * self._f[None, :]

        self._p_xyz = q.q[:, None, None] * channel.w[:, :, None] * q.q[None, None, :]
        restricted = np.where(self._triple_mask, self._p_xyz, 0.0)
        self._mass = float(restricted.sum())
        self._p_xyz_tilde = restricted / self._mass if self._mass > 0 else restricted

        self._scalar: ScalarCgf | None = None
        self._vector: VectorCgf | None = None

    @property
    def channel(self) -> Channel:
        return self._channel

    @property
    def q(self) -> InputDistribution:
        return self._q

    @property
    def rho(self) -> float:
        return self._rho

    @property
    def eta(self) -> float:
        """rho/(1+rho), the tilt at which the scalar CGF has derivative D_o(rho)."""
        return self._rho / (1.0 + self._rho)

    @property
    def eta_tilde(self) -> float:
        """(1-rho)/(1+rho), the tilt of the singular-case CGF."""
        return (1.0 - self._rho) / (1.0 + self._rho)

    @property
    def v_tilde(self) -> NDArray:
        return np.array([(1.0 - self._rho) / (1.0 + self._rho), 1.0 / (1.0 + self._rho)])

    @property
    def supports(self) -> SupportSets:
        if self._sets is None:
            self._sets = support_sets(self._channel, self._q)
        return self._sets

    @property
    def pair_mask(self) -> NDArray:
        return self._pair_mask

    @property
    def triple_mask(self) -> NDArray:
        return self._triple_mask

    @property
    def f_rho(self) -> NDArray:
        return self._f

    @property
    def log_f_rho(self) -> NDArray:
        return self._log_f

    @property
    def p_y_rho(self) -> NDArray:
        return self._f

    @property
    def log_h(self) -> NDArray:
        """log sum_x Q(x) W(y|x)^(1/(1+rho)) per output, -inf on outputs unreachable under Q."""
        return self._log_h

    @property
    def p_x_given_y_rho(self) -> NDArray:
        return self._p_x_given_y

    @property
    def p_xy_rho(self) -> NDArray:
        return self._p_xy

    @property
    def p_xyz(self) -> NDArray:
        return self._p_xyz

    @property
    def p_xyz_tilde(self) -> NDArray:
        return self._p_xyz_tilde

    @property
    def mass_s_tilde(self) -> float:
        return self._mass

    @property
    def scalar_cgf(self) -> ScalarCgf:
        if self._scalar is None:
            self._scalar = ScalarCgf(self)
        return self._scalar

    @property
    def vector_cgf(self) -> VectorCgf:
        if self._vector is None:
            self._vector = VectorCgf(self)
        return self._vector

    def __repr__(self) -> str:
        return f"TiltedFamily({self._channel.name}, rho={self._rho:.6g})"


def build_tilted_family(channel: Channel, q: InputDistribution, rho: float) -> TiltedFamily:
    return TiltedFamily(channel, q, rho)


class ScalarCgf:
    """Lambda_rho(lam) = log sum_{s_q} Q(x) W(y|x)^(1-lam) f_rho(y)^lam.

    Derivatives are the mean and variance of log f_rho(Y)/W(Y|X) under the tilted pair law,
    which is proportional to Q W^(1-lam) f_rho^lam on s_q.
    """

    def __init__(self, family: TiltedFamily):
        mask = family.pair_mask
        log_w = np.where(mask, _log_or_neg_inf(family.channel.w), 0.0)
        self._mask = mask
        self._log_base = np.where(mask, _log_or_neg_inf(family.q.q)[:, None] + log_w, -np.inf)
        self._values = np.where(mask, family.log_f_rho[None, :] - log_w, 0.0)
        self._law = DiscreteLaw(self._values[mask], np.exp(self._log_base[mask]))

    @property
    def law(self) -> DiscreteLaw:
        """Law of log f_rho(Y)/W(Y|X) under Q x W."""
        return self._law

    def value(self, lam: float) -> float:
        return float(logsumexp(self._log_base[self._mask] + lam * self._values[self._mask]))

    def tilted_pair(self, lam: float) -> NDArray:
        """The tilted pair law as a |X| x |Y| matrix."""
        weights = np.zeros(self._mask.shape)
        weights[self._mask] = softmax(self._log_base[self._mask] + lam * self._values[self._mask])
        return weights

    def d1(self, lam: float) -> float:
        return float(np.sum(self.tilted_pair(lam) * self._values))

    def d2(self, lam: float) -> float:
        pair = self.tilted_pair(lam)
        centered = self._values - np.sum(pair * self._values)
        return float(np.sum(pair * centered**2))

    def m3(self, lam: float) -> float:
        """Third absolute central moment under the tilted pair law."""
        pair = self.tilted_pair(lam)
        centered = self._values - np.sum(pair * self._values)
        return float(np.sum(pair * np.abs(centered) ** 3))


def lambda_rho(family: TiltedFamily, lam: float) -> float:
    return family.scalar_cgf.value(lam)


def lambda_rho_d1(family: TiltedFamily, lam: float) -> float:
    return family.scalar_cgf.d1(lam)


def lambda_rho_d2(family: TiltedFamily, lam: float) -> float:
    return family.scalar_cgf.d2(lam)


def d_o(family: TiltedFamily) -> float:
    """D_o(rho) = Lambda_rho'(rho/(1+rho))."""
    return family.scalar_cgf.d1(family.eta)


class VectorCgf:
    """Lambda_{1,rho}(v) = log E exp(v . A) under the restricted triple law.

    A = [log W(y|x)/f_rho(y), log W(y|z)/W(y|x)] on s_q_tilde. The tilted triple law is proportional to
    the restricted triple law times W(y|x)^(v1-v2) f_rho(y)^(-v1) W(y|z)^v2.
    """

    def __init__(self, family: TiltedFamily):
        mask = family.triple_mask
        log_w = np.where(family.pair_mask, _log_or_neg_inf(family.channel.w), 0.0)
        first = log_w[:, :, None] - family.log_f_rho[None, :, None]
        second = log_w.T[None, :, :] - log_w[:, :, None]
        self._mask = mask
        self._coords = np.stack([np.where(mask, first, 0.0), np.where(mask, second, 0.0)], axis=-1)
        self._log_base = np.where(mask, _log_or_neg_inf(np.where(mask, family.p_xyz_tilde, 1.0)), -np.inf)
        if np.any(mask):
            self._law = VectorLaw(self._coords[mask], family.p_xyz_tilde[mask])
        else:
            self._law = None

    @property
    def law(self) -> VectorLaw:
        """Law of A under the restricted triple law."""
        if self._law is None:
            msg = "The joint support s_q_tilde is empty."
            raise EmptySupportError(msg)
        return self._law

    def value(self, v: ArrayLike) -> float:
        v = np.asarray(v, dtype=np.float64)
        return float(logsumexp(self._log_base[self._mask] + self._coords[self._mask] @ v))

    def tilted_triple(self, v: ArrayLike) -> NDArray:
        """The tilted triple law as a |X| x |Y| x |X| array."""
        v = np.asarray(v, dtype=np.float64)
        weights = np.zeros(self._mask.shape)
        weights[self._mask] = softmax(self._log_base[self._mask] + self._coords[self._mask] @ v)
        return weights

    def gradient(self, v: ArrayLike) -> NDArray:
        triple = self.tilted_triple(v)
        return np.einsum("xyz,xyzk->k", triple, self._coords)

    def covariance(self, v: ArrayLike) -> NDArray:
        triple = self.tilted_triple(v)
        centered = self._coords - np.einsum("xyz,xyzk->k", triple, self._coords)
        return np.einsum("xyz,xyzk,xyzl->kl", triple, centered, centered)

    def tilted_law(self, v: ArrayLike) -> VectorLaw:
        """Law of A under the tilted triple law."""
        return self.law.tilt(v)


def lambda1(family: TiltedFamily, v: ArrayLike) -> float:
    return family.vector_cgf.value(v)


def lambda1_grad(family: TiltedFamily, v: ArrayLike) -> NDArray:
    return family.vector_cgf.gradient(v)


def tilted_triple(family: TiltedFamily, v: ArrayLike) -> NDArray:
    return family.vector_cgf.tilted_triple(v)


def cov_at(family: TiltedFamily, v: ArrayLike) -> NDArray:
    return family.vector_cgf.covariance(v)


def lambda_o(family: TiltedFamily, lam: float) -> float:
    """Singular-case CGF, log E[(W(Y|X)/f_rho(Y))^lam] under the restricted triple law."""
    return family.vector_cgf.value([lam, 0.0])


def lambda_o_law(family: TiltedFamily) -> DiscreteLaw:
    """Law of log W(Y|X)/f_rho(Y) under the restricted triple law; tilt it for Lambda_o derivatives."""
    return family.vector_cgf.law.marginal(0)


def e_f(rate: float, q: InputDistribution, channel: Channel) -> float:
    """D(P^{rho*}_{XY} || Q x W) at the rho* solving E_o'(rho*) = rate.

    Raises:
        RateOutOfOpenIntervalError: The rate is not in (R_cr(Q), I(Q;W)).
    """
    from rcbound.exponents import rho_star  # noqa: PLC0415

    family = build_tilted_family(channel, q, rho_star(rate, q, channel))
    reference = q.q[:, None] * channel.w
    mask = family.pair_mask
    return float(np.sum(xlogy(family.p_xy_rho[mask], family.p_xy_rho[mask]) - family.p_xy_rho[mask] * np.log(reference[mask])))


@dataclass(frozen=True)
class IdentityResidual:
    name: str
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


@dataclass(frozen=True, kw_only=True)
class IdentityReport:
    """Residuals of the exponent identities at one (W, Q, r)."""

    rate: float
    rho: float
    singular: bool
    residuals: list[IdentityResidual] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(item.residual for item in self.residuals)

    def passed(self, tolerance: float = IDENTITY_TOLERANCE) -> bool:
        return self.max_residual <= tolerance

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                ts.IDENTITY: [item.name for item in self.residuals],
                ts.LHS: [item.lhs for item in self.residuals],
                ts.RHS: [item.rhs for item in self.residuals],
                ts.RESIDUAL: [item.residual for item in self.residuals],
            },
        )


def verify_identities(channel: Channel, q: InputDistribution, rate: float) -> IdentityReport:
    """Evaluates both sides of the exponent identities at the rho* of `rate`.

    Checked: Lambda(eta) against E_o, Lambda'(eta) against the tilted expectation of log f/W, E_F against
    eta Lambda' - Lambda and against E_r(r,Q), the rate identity, the gradient and value of Lambda_1 at
    v_tilde, and for singular pairs log P{s_q_tilde} = -E_o(1,Q).

    Raises:
        RateOutOfOpenIntervalError: The rate is not in (R_cr(Q), I(Q;W)).
    """
    from rcbound.exponents import eo, er_q, rho_star  # noqa: PLC0415

    rho = rho_star(rate, q, channel)
    family = build_tilted_family(channel, q, rho)
    eta = family.eta
    cgf = family.scalar_cgf
    value, slope = cgf.value(eta), cgf.d1(eta)
    mask = family.pair_mask
    log_ratio = np.where(mask, family.log_f_rho[None, :] - _log_or_neg_inf(np.where(mask, channel.w, 1.0)), 0.0)
    divergence = e_f(rate, q, channel)
    gradient = family.vector_cgf.gradient(family.v_tilde)
    singular = classify_pair(channel, q).is_singular

    residuals = [
        IdentityResidual("lambda_at_eta", value, -eo(rho, q, channel) / (1.0 + rho)),
        IdentityResidual("lambda_d1_at_eta", slope, float(np.sum(family.p_xy_rho * log_ratio))),
        IdentityResidual("fano_exponent_legendre", divergence, eta * slope - value),
        IdentityResidual("rate_identity", rate, -slope / (1.0 + rho) - value),
        IdentityResidual("fano_equals_random_coding", divergence, er_q(rate, q, channel).e_r_q),
        IdentityResidual("lambda1_grad_first", float(gradient[0]), -slope),
        IdentityResidual("lambda1_grad_second", float(gradient[1]), 0.0),
        IdentityResidual("lambda1_at_v_tilde", family.vector_cgf.value(family.v_tilde), -np.log(family.mass_s_tilde) + 2.0 * value),
    ]
    if singular:
        residuals.append(IdentityResidual("singular_support_mass", float(np.log(family.mass_s_tilde)), -eo(1.0, q, channel)))

    report = IdentityReport(rate=rate, rho=rho, singular=singular, residuals=residuals)
    _log.info(f"Identity check for {channel.name} at r={rate}: max residual {report.max_residual:.3g}.")
    return report
