"""Brooks-Corey constitutive laws and the two graph parametrizations.

The saturation/pressure relation is the Brooks-Corey family

    S(p) = (p / p_b)^(-beta)   for p < p_b,      S(p) = 1 otherwise,
    lam(s) = s^(3 + 2/beta),

with entry pressure p_b < 0 and exponent beta > 0.  Integrating
lam(S(p)) in pressure gives the Kirchhoff variable u with a closed-form
power law u = u_b * s^eta.  Two sets of constants for (eta, u_b) are
supported (see ``EtaMode``); the quadrature oracle in this module picks
the internally consistent one, which is the default.

Two parametrizations tau -> (s(tau), u(tau)) of the graph are provided:

* ``u_formulation``: u(tau) = tau, s = S~(tau).  Degenerate: s' blows up
  at the dry limit u -> 0+.
* ``tau_formulation``: the parametrization normalized by
  max(s'(tau), u'(tau)) = 1 with s(0) = 0.  Non-degenerate with
  alpha_low = alpha_high = 1.

Both are extended below tau = 0 by s = 0, u(tau) = tau so that u' = 1
holds for transient negative Newton iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

__all__ = [
    "BrooksCoreyModel",
    "DerivedParams",
    "Parametrization",
    "derive_params",
    "saturation_of_pressure",
    "mobility",
    "mobility_derivative",
    "sat_of_kirchhoff",
    "tau_formulation",
    "u_formulation",
    "make_parametrization",
    "kirchhoff_quadrature_oracle",
    "kirchhoff_closed_form",
    "check_nondegeneracy",
    "select_eta_mode",
]

# Cap used when reporting the u-formulation's singular s' without
# producing non-finite arithmetic in assembly.
SPRIME_CAP = 1.0e16


@dataclass(frozen=True)
class BrooksCoreyModel:
    """Brooks-Corey parameters. p_b < 0 is the entry pressure."""

    beta: float
    p_b: float
    eta_mode: str = "derived"  # "derived" | "legacy"

    def __post_init__(self):
        if not self.p_b < 0:
            raise ValueError(f"p_b must be strictly negative, got {self.p_b}")
        if not self.beta > 0:
            raise ValueError(f"beta must be strictly positive, got {self.beta}")
        if self.eta_mode not in ("derived", "legacy"):
            raise ValueError(f"unknown eta_mode {self.eta_mode!r}")


@dataclass(frozen=True)
class DerivedParams:
    """Constants derived from a Brooks-Corey model.

    eta      -- exponent of the Kirchhoff power law u = u_b * s^eta
    u_b      -- Kirchhoff value at saturation onset (p = p_b)
    tau_star -- branch-switch point of the tau-formulation
    tau_sat  -- tau at which the tau-formulation reaches s = 1
    """

    eta: float
    u_b: float
    tau_star: float
    tau_sat: float


def derive_params(model: BrooksCoreyModel) -> DerivedParams:
    """Closed-form constants (eta, u_b, tau_star, tau_sat).

    "derived" mode uses eta = 3 + 1/beta, the exponent obtained by direct
    integration of lam(S(p)); "legacy" mode uses eta = beta + 3 + 1/beta.
    In both modes u_b = -p_b / (beta * eta).
    """
    beta = model.beta
    if model.eta_mode == "legacy":
        eta = beta + 3.0 + 1.0 / beta
    else:
        eta = 3.0 + 1.0 / beta
    u_b = -model.p_b / (beta * eta)
    tau_star = min((eta * u_b) ** (1.0 / (1.0 - eta)), 1.0)
    tau_sat = tau_star + u_b * (1.0 - tau_star**eta)
    return DerivedParams(eta=eta, u_b=u_b, tau_star=tau_star, tau_sat=tau_sat)


def saturation_of_pressure(model: BrooksCoreyModel, p):
    """S(p): (p/p_b)^(-beta) below the entry pressure, 1 above."""
    p = np.asarray(p, dtype=float)
    out = np.ones_like(p)
    dry = p < model.p_b
    out = np.where(dry, np.where(dry, p, model.p_b) / model.p_b, 1.0) ** np.where(
        dry, -model.beta, 0.0
    )
    return out if out.ndim else float(out)


def mobility(model: BrooksCoreyModel, s):
    """lam(s) = s^(3 + 2/beta), evaluated on s clamped to [0, 1]."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    out = s ** (3.0 + 2.0 / model.beta)
    return out if out.ndim else float(out)


def mobility_derivative(model: BrooksCoreyModel, s):
    """lam'(s) on the clamped range, 0 outside (0, 1)."""
    s = np.asarray(s, dtype=float)
    e = 3.0 + 2.0 / model.beta
    inside = (s > 0.0) & (s < 1.0)
    out = np.where(inside, e * np.where(inside, s, 1.0) ** (e - 1.0), 0.0)
    return out if out.ndim else float(out)


def sat_of_kirchhoff(model: BrooksCoreyModel, u, params: DerivedParams | None = None):
    """S~(u) = (u/u_b)^(1/eta) for 0 <= u < u_b, 1 above, 0 for u < 0."""
    if params is None:
        params = derive_params(model)
    u = np.asarray(u, dtype=float)
    r = np.clip(u / params.u_b, 0.0, None)
    out = np.minimum(r ** (1.0 / params.eta), 1.0)
    return out if out.ndim else float(out)


def _sat_of_kirchhoff_prime(params: DerivedParams, u):
    """d S~/du; +inf at u = 0+, 0 for u >= u_b and u < 0 (right derivative at u_b)."""
    u = np.asarray(u, dtype=float)
    eta, u_b = params.eta, params.u_b
    with np.errstate(divide="ignore"):
        inner = (u > 0.0) & (u < u_b)
        safe = np.where(u > 0.0, u, 1.0)
        val = (1.0 / (eta * u_b)) * (safe / u_b) ** (1.0 / eta - 1.0)
        out = np.where(inner, val, np.where(u == 0.0, np.inf, 0.0))
    return out


@dataclass(frozen=True)
class Parametrization:
    """A pair of monotone maps tau -> (s(tau), u(tau)) covering the graph of S.

    kind is "tau" (non-degenerate, max(s', u') = 1) or "u" (u(tau) = tau).
    The dry-limit constants of the continuous framework are documented
    here but unused: p at the graph endpoint is -inf for Brooks-Corey and
    the Kirchhoff value there is 0 (the s(0) = 0 normalization is used
    throughout, so the graph endpoint sits at tau = 0).
    """

    kind: str
    model: BrooksCoreyModel
    params: DerivedParams = field(init=False)
    # estimated non-degeneracy constants, refreshed by check_nondegeneracy
    alpha_low_estimate: float = field(init=False, default=math.nan)
    alpha_high_estimate: float = field(init=False, default=math.nan)

    def __post_init__(self):
        if self.kind not in ("tau", "u"):
            raise ValueError(f"unknown parametrization kind {self.kind!r}")
        object.__setattr__(self, "params", derive_params(self.model))

    # -- maps ---------------------------------------------------------------

    def eval(self, tau):
        """Return (s, u, s', u') arrays; right derivatives at branch points."""
        tau = np.asarray(tau, dtype=float)
        p = self.params
        if self.kind == "u":
            u = tau.copy()
            up = np.ones_like(tau)
            s = np.where(tau >= 0.0, sat_of_kirchhoff(self.model, tau, p), 0.0)
            sp = np.where(tau >= 0.0, _sat_of_kirchhoff_prime(p, np.maximum(tau, 0.0)), 0.0)
            return s, u, sp, up
        eta, u_b, t_st = p.eta, p.u_b, p.tau_star
        neg = tau < 0.0
        low = (tau >= 0.0) & (tau < t_st)
        up_b = tau >= t_st
        t_low = np.where(low, tau, 0.0)
        u = np.where(neg, tau, 0.0)
        u = np.where(low, u_b * t_low**eta, u)
        u_up = tau - t_st + u_b * t_st**eta
        u = np.where(up_b, u_up, u)
        upr = np.where(low, eta * u_b * t_low ** (eta - 1.0), 1.0)
        s = np.where(low, tau, 0.0)
        s = np.where(up_b, sat_of_kirchhoff(self.model, np.where(up_b, u, 0.0), p), s)
        sp = np.where(low, 1.0, 0.0)
        sp = np.where(up_b, _sat_of_kirchhoff_prime(p, np.where(up_b, u, -1.0)), sp)
        return s, u, sp, upr

    def s(self, tau):
        return self.eval(tau)[0]

    def u(self, tau):
        return self.eval(tau)[1]

    def s_prime(self, tau):
        return self.eval(tau)[2]

    def u_prime(self, tau):
        return self.eval(tau)[3]

    # -- inverses -----------------------------------------------------------

    def sat_inverse(self, s):
        """Smallest tau >= 0 with s(tau) = s."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0.0) or np.any(s_arr > 1.0):
            raise ValueError("saturation outside [0, 1]")
        p = self.params
        u = p.u_b * s_arr**p.eta
        if self.kind == "u":
            out = u
        else:
            upper = s_arr >= p.tau_star
            out = np.where(upper, u - p.u_b * p.tau_star**p.eta + p.tau_star, s_arr)
        return out if out.ndim else float(out)

    def tau_of_pressure(self, pressure):
        """tau with p(tau) = pressure; the saturated branch is affine in u."""
        pr = np.asarray(pressure, dtype=float)
        p = self.params
        model = self.model
        sat = pr >= model.p_b
        u = np.where(
            sat,
            p.u_b + (pr - model.p_b),
            p.u_b * np.where(sat, 1.0, pr / model.p_b) ** (-model.beta * p.eta),
        )
        if self.kind == "u":
            out = u
        else:
            # unsaturated values fall back through sat_inverse of S(p)
            s_val = saturation_of_pressure(model, pr)
            out = np.where(
                np.asarray(s_val) >= p.tau_star,
                u - p.u_b * p.tau_star**p.eta + p.tau_star,
                s_val,
            )
        return out if out.ndim else float(out)

    # -- closed-form integrals used by the diagnostics ----------------------

    def s_antiderivative(self, tau):
        """int_0^tau s(a) da, exact per branch."""
        tau = np.asarray(tau, dtype=float)
        p = self.params
        eta, u_b = p.eta, p.u_b

        def g_int(u):
            # int (x/u_b)^(1/eta) dx from 0 to u, for 0 <= u <= u_b
            return (eta / (eta + 1.0)) * u_b * np.clip(u / u_b, 0.0, None) ** ((eta + 1.0) / eta)

        if self.kind == "u":
            t = np.clip(tau, 0.0, None)
            out = np.where(t < u_b, g_int(np.minimum(t, u_b)), g_int(u_b) + (t - u_b))
        else:
            t_st, t_sat = p.tau_star, p.tau_sat
            t = np.clip(tau, 0.0, None)
            low = np.minimum(t, t_st)
            out = 0.5 * low**2
            u_at = np.clip(t - t_st, 0.0, None) + u_b * t_st**eta
            mid = t > t_st
            out = out + np.where(
                mid, g_int(np.minimum(u_at, u_b)) - g_int(u_b * t_st**eta), 0.0
            )
            out = out + np.clip(t - t_sat, 0.0, None)
        return out if out.ndim else float(out)

    def xi(self, tau):
        """xi(tau) = int_0^tau sqrt(u'(a)) da, exact per branch."""
        tau = np.asarray(tau, dtype=float)
        p = self.params
        if self.kind == "u":
            out = tau.astype(float)
            return out if out.ndim else float(out)
        eta, u_b, t_st = p.eta, p.u_b, p.tau_star
        # lower branch: sqrt(u') = sqrt(eta u_b) a^((eta-1)/2)
        c = math.sqrt(eta * u_b) * 2.0 / (eta + 1.0)
        low = np.clip(tau, 0.0, t_st)
        out = c * low ** ((eta + 1.0) / 2.0)
        out = out + np.clip(tau - t_st, 0.0, None)  # upper branch: u' = 1
        out = out + np.minimum(tau, 0.0)  # extension: u' = 1
        return out if out.ndim else float(out)


def tau_formulation(model: BrooksCoreyModel) -> Parametrization:
    return Parametrization(kind="tau", model=model)


def u_formulation(model: BrooksCoreyModel) -> Parametrization:
    return Parametrization(kind="u", model=model)


def make_parametrization(kind: str, model: BrooksCoreyModel) -> Parametrization:
    return Parametrization(kind=kind, model=model)


# -- oracle ------------------------------------------------------------------


def kirchhoff_closed_form(model: BrooksCoreyModel, p):
    """Closed-form u(p) implied by the model's eta_mode constants."""
    dp = derive_params(model)
    p = np.asarray(p, dtype=float)
    sat = p >= model.p_b
    ratio = np.where(sat, 1.0, p / model.p_b)
    out = np.where(sat, dp.u_b + (p - model.p_b), dp.u_b * ratio ** (-model.beta * dp.eta))
    return out if out.ndim else float(out)


def kirchhoff_quadrature_oracle(model: BrooksCoreyModel, p: float) -> float:
    """u(p) = int_{-inf}^{p} lam(S(a)) da by adaptive quadrature.

    Independent of the closed forms; used to validate them and to select
    the internally consistent eta_mode.  Relative accuracy ~1e-12.
    """
    lam_exp = 3.0 + 2.0 / model.beta
    p_b = model.p_b

    def integrand(a):
        return (a / p_b) ** (-model.beta * lam_exp)

    upper = min(p, p_b)
    val, err = quad(integrand, -np.inf, upper, epsabs=0.0, epsrel=1e-13, limit=400)
    if val != 0.0 and err > 1e-9 * abs(val):
        raise RuntimeError(f"quadrature did not converge: value {val}, error {err}")
    if p > p_b:
        val += p - p_b
    return val


def select_eta_mode(beta: float, p_b: float, n_points: int = 20) -> str:
    """Return the eta_mode whose closed form matches the quadrature oracle."""
    best_mode, best_dev = None, math.inf
    for mode in ("derived", "legacy"):
        model = BrooksCoreyModel(beta=beta, p_b=p_b, eta_mode=mode)
        ps = p_b * np.logspace(0.0, 2.0, n_points)
        dev = 0.0
        for p in ps:
            ref = kirchhoff_quadrature_oracle(model, p)
            dev = max(dev, abs(kirchhoff_closed_form(model, p) - ref) / ref)
        if dev < best_dev:
            best_mode, best_dev = mode, dev
    return best_mode


def check_nondegeneracy(param: Parametrization, tau_grid) -> tuple[float, float]:
    """(alpha_low, alpha_high) estimates: min and max over the grid of max(s', u')."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    _, _, sp, up = param.eval(tau_grid)
    m = np.maximum(sp, up)
    lo, hi = float(np.min(m)), float(np.max(m))
    object.__setattr__(param, "alpha_low_estimate", lo)
    object.__setattr__(param, "alpha_high_estimate", hi)
    return lo, hi
