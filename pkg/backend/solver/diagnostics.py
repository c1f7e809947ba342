"""Functionals tracked along a run and the identities checked on their history.

A DiagnosticsTracker turns each recorded state into a DiagnosticsRecord,
folding the running time integrals (B1, B2, the tau dissipation integral, the
coupling work) as it goes. The history functions below recompute what they
need from the records alone, so they work the same on a live run and on a
time series read back from CSV.

Time integrals use the trapezoid rule on the record times. When the record
carries the integrand's time derivative (computed from the right-hand side,
not by differencing) the endpoint-slope correction h^2/12 (g'_k - g'_{k+1}) is
added per interval.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.stats import linregress

from solver.errors import ContractViolation, FitError, SchemaError
from solver.littlewood_paley import b0_infty1_norm, besov_norm, make_partition
from solver.model import ModelParams, State, deformation, gamma_field, time_derivative
from solver.spectral_core import (
    AnyField,
    VectorField2,
    ScalarField,
    divergence_tensor,
    gradient_energy,
    hessian_energy,
    inner,
    pointwise_magnitude,
    quadrature_lp,
    spectral_energy,
)

logger = logging.getLogger(__name__)

SplittingChoice = Literal["power", "log-power"]

MIN_FIT_POINTS = 10
RELIABLE_R2 = 0.95

# Mandatory columns first, then the extension columns.
CSV_COLUMNS = [
    "t", "l2_u", "l2_tau", "linf_tau", "h1_u", "h1_tau", "grad_l2_u", "grad_l2_tau",
    "e_eta", "h_eta", "eta", "lowfreq_energy", "splitting_radius", "b1", "b2",
    "tau_identity_residual", "velocity_energy_residual", "gamma_l2", "besov_m_sigma",
    "b0inf1_tau_integral",
    "l4_tau", "e0", "e1", "pairing", "hess_l2_tau_sq", "tau_dissipation", "tau_dissipation_rate",
    "coupling_work", "coupling_work_rate", "b2_tilde", "eta_equivalence_ok",
    "tau_hat_l1_splitting",
]
REQUIRED_COLUMNS = CSV_COLUMNS[:20]


class DiagnosticsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    cadence: float = Field(0.01, ge=0, description="time between records (0: initial and final only)")
    p_list: Tuple[float, ...] = Field((2.0, 4.0, math.inf), description="L^p exponents for u and tau")
    eta: float = Field(0.125, ge=0, le=1, description="weight of <tau, grad u> in E_eta")
    c2: float = Field(100.0, gt=0, description="Fourier splitting constant C2")
    f_choice: SplittingChoice = Field("power", description="power: (1+t)^l, log-power: ln^l(e+t)")
    f_exponent: float = Field(2.0, gt=0, description="exponent l of the splitting weight")
    sigma_list: Tuple[float, ...] = Field((1.0,), description="negative Besov indices tracked; the first feeds besov_m_sigma")
    heavy_stride: int = Field(1, ge=1, description="compute Gamma and Besov diagnostics every this many records")
    fit_window_start: Optional[float] = Field(None, description="overrides the decay-fit window start")
    fit_window_end: Optional[float] = Field(None, description="overrides the decay-fit window end")

    @field_validator("p_list")
    @classmethod
    def _check_p(cls, value):
        if any(p < 1 for p in value):
            raise ValueError(f"L^p exponents must be >= 1, got {value}")
        return value

    @field_validator("sigma_list")
    @classmethod
    def _check_sigma(cls, value):
        if not value or any(s < 0 or s > 1 for s in value):
            raise ValueError(f"sigma values must lie in [0, 1], got {value}")
        return value


@dataclass(eq=False)
class DiagnosticsRecord:
    t: float
    lp_norms_u: Dict[float, float] = field(default_factory=dict)
    lp_norms_tau: Dict[float, float] = field(default_factory=dict)
    h1_u: float = 0.0
    h1_tau: float = 0.0
    grad_l2_u: float = 0.0
    grad_l2_tau: float = 0.0
    e_eta: float = 0.0
    h_eta: float = 0.0
    eta: float = 0.0
    lowfreq_energy: float = 0.0
    splitting_radius: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    tau_identity_residual: Optional[float] = None
    velocity_energy_residual: Optional[float] = None
    gamma_lp: Dict[float, float] = field(default_factory=dict)
    besov_neg: Dict[float, float] = field(default_factory=dict)
    besov_m_sigma: Optional[float] = None
    b0_infty1_tau_integral: Optional[float] = None
    e0: float = 0.0
    e1: float = 0.0
    pairing: float = 0.0
    hess_l2_tau_sq: float = 0.0
    tau_dissipation: float = 0.0
    tau_dissipation_rate: Optional[float] = None
    coupling_work: float = 0.0
    coupling_work_rate: Optional[float] = None
    b2_tilde: float = 0.0
    eta_equivalence_ok: bool = True
    tau_hat_l1_splitting: float = 0.0

    @property
    def l2_u(self) -> float:
        return self.lp_norms_u.get(2.0, math.sqrt(max(self.h1_u ** 2 - self.grad_l2_u ** 2, 0.0)))

    @property
    def l2_tau(self) -> float:
        return self.lp_norms_tau.get(2.0, math.sqrt(max(self.h1_tau ** 2 - self.grad_l2_tau ** 2, 0.0)))

    def column(self, name: str) -> Optional[float]:
        return self.to_values()[name]

    def to_values(self) -> Dict[str, Optional[float]]:
        return {
            "t": self.t,
            "l2_u": self.l2_u,
            "l2_tau": self.l2_tau,
            "linf_tau": self.lp_norms_tau.get(math.inf),
            "h1_u": self.h1_u,
            "h1_tau": self.h1_tau,
            "grad_l2_u": self.grad_l2_u,
            "grad_l2_tau": self.grad_l2_tau,
            "e_eta": self.e_eta,
            "h_eta": self.h_eta,
            "eta": self.eta,
            "lowfreq_energy": self.lowfreq_energy,
            "splitting_radius": self.splitting_radius,
            "b1": self.b1,
            "b2": self.b2,
            "tau_identity_residual": self.tau_identity_residual,
            "velocity_energy_residual": self.velocity_energy_residual,
            "gamma_l2": self.gamma_lp.get(2.0),
            "besov_m_sigma": self.besov_m_sigma,
            "b0inf1_tau_integral": self.b0_infty1_tau_integral,
            "l4_tau": self.lp_norms_tau.get(4.0),
            "e0": self.e0,
            "e1": self.e1,
            "pairing": self.pairing,
            "hess_l2_tau_sq": self.hess_l2_tau_sq,
            "tau_dissipation": self.tau_dissipation,
            "tau_dissipation_rate": self.tau_dissipation_rate,
            "coupling_work": self.coupling_work,
            "coupling_work_rate": self.coupling_work_rate,
            "b2_tilde": self.b2_tilde,
            "eta_equivalence_ok": float(self.eta_equivalence_ok),
            "tau_hat_l1_splitting": self.tau_hat_l1_splitting,
        }

    def to_row(self) -> Dict[str, str]:
        """CSV cells; floats use repr so identical runs give identical bytes."""
        return {k: ("" if v is None else repr(float(v))) for k, v in self.to_values().items()}

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "DiagnosticsRecord":
        missing = [c for c in REQUIRED_COLUMNS if c not in row]
        if missing:
            raise SchemaError(f"diagnostics row lacks columns {missing}")

        def num(name: str) -> Optional[float]:
            cell = row.get(name)
            if cell is None or cell.strip() == "":
                return None
            try:
                return float(cell)
            except ValueError as e:
                raise SchemaError(f"column '{name}' holds non-numeric value '{cell}'") from e

        def req(name: str) -> float:
            value = num(name)
            if value is None:
                raise SchemaError(f"column '{name}' is empty at t={row.get('t')}")
            return value

        tau_lp = {2.0: req("l2_tau")}
        for p, name in ((4.0, "l4_tau"), (math.inf, "linf_tau")):
            if num(name) is not None:
                tau_lp[p] = num(name)
        gamma_l2 = num("gamma_l2")
        ok = num("eta_equivalence_ok")
        return cls(
            t=req("t"),
            lp_norms_u={2.0: req("l2_u")},
            lp_norms_tau=tau_lp,
            h1_u=req("h1_u"), h1_tau=req("h1_tau"),
            grad_l2_u=req("grad_l2_u"), grad_l2_tau=req("grad_l2_tau"),
            e_eta=req("e_eta"), h_eta=req("h_eta"), eta=req("eta"),
            lowfreq_energy=req("lowfreq_energy"), splitting_radius=req("splitting_radius"),
            b1=req("b1"), b2=req("b2"),
            tau_identity_residual=num("tau_identity_residual"),
            velocity_energy_residual=num("velocity_energy_residual"),
            gamma_lp={} if gamma_l2 is None else {2.0: gamma_l2},
            besov_m_sigma=num("besov_m_sigma"),
            b0_infty1_tau_integral=num("b0inf1_tau_integral"),
            e0=num("e0") or 0.0, e1=num("e1") or 0.0, pairing=num("pairing") or 0.0,
            hess_l2_tau_sq=num("hess_l2_tau_sq") or 0.0,
            tau_dissipation=num("tau_dissipation") or 0.0,
            tau_dissipation_rate=num("tau_dissipation_rate"),
            coupling_work=num("coupling_work") or 0.0,
            coupling_work_rate=num("coupling_work_rate"),
            b2_tilde=num("b2_tilde") or 0.0,
            eta_equivalence_ok=True if ok is None else ok > 0.5,
            tau_hat_l1_splitting=num("tau_hat_l1_splitting") or 0.0,
        )


class FitResult(NamedTuple):
    exponent: float
    r_squared: float


# --- Single-state functionals ---

def lp_norm(f: AnyField, p: float) -> float:
    """Quadrature L^p norm; tensors use the pointwise Frobenius norm."""
    return quadrature_lp(pointwise_magnitude(f), p, f.grid.cell_area)


def tau_grad_u_pairing(state: State) -> float:
    """<tau, grad u> = sum_ij <tau_ij, d_j u_i>; equals <tau, D(u)> for symmetric tau."""
    return inner(state.tau, deformation(state.u))


def energy_pair(state: State, eta: float) -> Tuple[float, float]:
    """(E_eta, H_eta) with E_eta = |(u,tau)|_{H1}^2 - eta <tau, grad u> and
    H_eta = (eta/16)|grad u|^2 + (1/4)|grad tau|_{H1}^2."""
    e0 = (spectral_energy(state.u) + gradient_energy(state.u)
          + spectral_energy(state.tau) + gradient_energy(state.tau))
    e_eta = e0 - eta * tau_grad_u_pairing(state)
    grad_tau_h1_sq = gradient_energy(state.tau) + hessian_energy(state.tau)
    h_eta = eta / 16.0 * gradient_energy(state.u) + 0.25 * grad_tau_h1_sq
    return e_eta, h_eta


def splitting_radius(t: float, f_choice: SplittingChoice = "power", c2: float = 100.0,
                     exponent: float = 2.0) -> float:
    """sqrt(C2 f'(t)/f(t)) for f = (1+t)^l or f = ln^l(e+t)."""
    if t < 0:
        raise ContractViolation(f"splitting radius needs t >= 0, got {t}")
    if f_choice == "power":
        ratio = exponent / (1.0 + t)
    else:
        ratio = exponent / ((math.e + t) * math.log(math.e + t))
    return math.sqrt(c2 * ratio)


def _splitting_mask(state: State, radius: float) -> np.ndarray:
    return state.grid.tables.k_sq <= radius * radius


def fourier_splitting_energy(state: State, f_choice: SplittingChoice = "power", c2: float = 100.0,
                             exponent: float = 2.0) -> Tuple[float, float]:
    """(radius, energy of (u, tau) on the modes inside S(t)), Parseval-normalized."""
    grid = state.grid
    radius = splitting_radius(state.t, f_choice, c2, exponent)
    mask = _splitting_mask(state, radius)
    weights = (1.0, 1.0, 1.0, 2.0, 1.0)
    comps = (*state.u.components(), *state.tau.components())
    power = sum(w * np.abs(c.coefficients()) ** 2 for w, c in zip(weights, comps))
    energy = float(np.sum(power[mask])) * grid.box_length ** 2 / grid.n ** 4
    return radius, energy


def tau_hat_l1_on(state: State, radius: float) -> float:
    """Discrete integral of the Frobenius norm of tau-hat over |xi| <= radius."""
    grid = state.grid
    mask = _splitting_mask(state, radius)
    t11, t12, t22 = (c.coefficients() for c in state.tau.components())
    frob = np.sqrt(np.abs(t11) ** 2 + 2.0 * np.abs(t12) ** 2 + np.abs(t22) ** 2)
    return float(np.sum(frob[mask])) * (2.0 * math.pi) ** 2 / grid.n ** 2


def gradient_energy_rate(f: AnyField, df: AnyField) -> float:
    """d/dt |grad f|^2 = 2 <grad f, grad df>, evaluated spectrally."""
    grid = f.grid
    t = grid.tables
    kd_sq = t.kd1 ** 2 + t.kd2 ** 2
    if isinstance(f, ScalarField):
        weights, comps, dcomps = (1.0,), (f,), (df,)
    else:
        weights = (1.0, 1.0) if isinstance(f, VectorField2) else (1.0, 2.0, 1.0)
        comps, dcomps = f.components(), df.components()
    total = 0.0
    for w, c, dc in zip(weights, comps, dcomps):
        total += w * float(np.sum(kd_sq * np.real(np.conj(c.coefficients()) * dc.coefficients())))
    return 2.0 * total * grid.box_length ** 2 / grid.n ** 4


def gagliardo_nirenberg_ratio(f: AnyField) -> float:
    """|f|_{L4}^2 / (|f|_{L2} |grad f|_{L2}); 0 for a field with no gradient."""
    denominator = math.sqrt(spectral_energy(f)) * math.sqrt(gradient_energy(f))
    if denominator == 0.0:
        return 0.0
    return lp_norm(f, 4.0) ** 2 / denominator


# --- Quadrature ---

def _interval_integral(h: float, g0: float, g1: float, d0: Optional[float] = None,
                       d1: Optional[float] = None) -> float:
    value = 0.5 * h * (g0 + g1)
    if d0 is not None and d1 is not None:
        value += h * h / 12.0 * (d0 - d1)
    return value


def _cumulative(times: Sequence[float], values: Sequence[float],
                rates: Optional[Sequence[Optional[float]]] = None) -> List[float]:
    out = [0.0]
    for k in range(1, len(times)):
        d0 = rates[k - 1] if rates is not None else None
        d1 = rates[k] if rates is not None else None
        out.append(out[-1] + _interval_integral(times[k] - times[k - 1], values[k - 1], values[k], d0, d1))
    return out


def _relative(residual: float, scale: float) -> float:
    return abs(residual) / scale if scale > 0 else abs(residual)


# --- Tracker ---

class DiagnosticsTracker:
    """Builds DiagnosticsRecords for successive states of one run."""

    def __init__(self, params: ModelParams, cfg: DiagnosticsConfig, hold_velocity: bool = False):
        self.params = params
        self.cfg = cfg
        self.hold_velocity = hold_velocity
        self.records: List[DiagnosticsRecord] = []
        self._count = 0
        self._tau_identity_integral = 0.0
        self._nu_integral = 0.0
        self._work_integral = 0.0
        self._b0_integral = 0.0
        self._last_heavy: Optional[Tuple[float, float]] = None
        self._m_sigma: Optional[float] = None
        self._tau0_sq: Optional[float] = None
        self._u0_sq: Optional[float] = None
        self._tau_identity_on = params.rotation_mode == "corotation" and params.alpha == 0.0

    def observe(self, state: State) -> DiagnosticsRecord:
        """Compute the record for ``state`` and fold it into the running integrals."""
        params, cfg = self.params, self.cfg
        state = state.as_spectral()
        u, tau = state.u, state.tau
        if self.hold_velocity:
            dstate = State(state.t, VectorField2.zeros(state.grid, True), time_derivative(state, params).tau)
        else:
            dstate = time_derivative(state, params)

        lp_u = {p: lp_norm(u, p) for p in cfg.p_list}
        lp_tau = {p: lp_norm(tau, p) for p in cfg.p_list}
        l2_u_sq, l2_tau_sq = spectral_energy(u), spectral_energy(tau)
        lp_u.setdefault(2.0, math.sqrt(l2_u_sq))
        lp_tau.setdefault(2.0, math.sqrt(l2_tau_sq))
        grad_u_sq, grad_tau_sq = gradient_energy(u), gradient_energy(tau)
        hess_tau_sq = hessian_energy(tau)
        e0 = l2_u_sq + grad_u_sq + l2_tau_sq + grad_tau_sq
        pairing = tau_grad_u_pairing(state)
        e_eta = e0 - cfg.eta * pairing
        h_eta = cfg.eta / 16.0 * grad_u_sq + 0.25 * (grad_tau_sq + hess_tau_sq)
        radius, lowfreq = fourier_splitting_energy(state, cfg.f_choice, cfg.c2, cfg.f_exponent)
        div_tau = divergence_tensor(tau)
        work = inner(u, div_tau)
        work_rate = inner(dstate.u, div_tau) + inner(u, divergence_tensor(dstate.tau))
        tau_diss_rate = gradient_energy_rate(tau, dstate.tau)

        rec = DiagnosticsRecord(
            t=state.t,
            lp_norms_u=lp_u, lp_norms_tau=lp_tau,
            h1_u=math.sqrt(l2_u_sq + grad_u_sq), h1_tau=math.sqrt(l2_tau_sq + grad_tau_sq),
            grad_l2_u=math.sqrt(grad_u_sq), grad_l2_tau=math.sqrt(grad_tau_sq),
            e_eta=e_eta, h_eta=h_eta, eta=cfg.eta,
            lowfreq_energy=lowfreq, splitting_radius=radius,
            e0=e0, e1=grad_u_sq + grad_tau_sq, pairing=pairing, hess_l2_tau_sq=hess_tau_sq,
            tau_dissipation=grad_tau_sq, tau_dissipation_rate=tau_diss_rate,
            coupling_work=work, coupling_work_rate=work_rate,
            eta_equivalence_ok=bool(0.5 * e0 - 1e-14 <= e_eta <= 2.0 * e0 + 1e-14),
            tau_hat_l1_splitting=tau_hat_l1_on(state, radius),
        )
        if not rec.eta_equivalence_ok:
            logger.warning(f"E_eta left [E0/2, 2 E0] at t={state.t:.6g} (eta={cfg.eta}); lower diagnostics.eta")

        self._fold_integrals(rec)
        if self._count % cfg.heavy_stride == 0:
            self._heavy(state, rec)
        self._count += 1
        self.records.append(rec)
        return rec

    def _fold_integrals(self, rec: DiagnosticsRecord) -> None:
        params = self.params
        a = params.a
        if not self.records:
            self._tau0_sq = rec.l2_tau ** 2
            self._u0_sq = rec.l2_u ** 2
        else:
            prev = self.records[-1]
            h = rec.t - prev.t
            rec.b1 = prev.b1 + _interval_integral(h, _b1_integrand(prev), _b1_integrand(rec))
            rec.b2 = prev.b2 + _interval_integral(h, _b2_integrand(prev), _b2_integrand(rec))
            rec.b2_tilde = prev.b2_tilde + _interval_integral(h, _b2_tilde_integrand(prev), _b2_tilde_integrand(rec))
            g0, d0 = _weighted_dissipation(prev, a)
            g1, d1 = _weighted_dissipation(rec, a)
            self._tau_identity_integral += _interval_integral(h, g0, g1, d0, d1)
            self._work_integral += _interval_integral(h, prev.coupling_work, rec.coupling_work,
                                                      prev.coupling_work_rate, rec.coupling_work_rate)
            self._nu_integral += _interval_integral(h, prev.grad_l2_u ** 2, rec.grad_l2_u ** 2)

        if self._tau_identity_on:
            lhs = math.exp(2.0 * a * rec.t) * rec.l2_tau ** 2 + 2.0 * params.mu * self._tau_identity_integral
            rec.tau_identity_residual = _relative(lhs - self._tau0_sq, self._tau0_sq)
        balance = rec.l2_u ** 2 - self._u0_sq - 2.0 * self._work_integral + 2.0 * params.nu * self._nu_integral
        rec.velocity_energy_residual = _relative(balance, max(self._u0_sq, rec.l2_u ** 2))

    def _heavy(self, state: State, rec: DiagnosticsRecord) -> None:
        cfg = self.cfg
        gamma = gamma_field(state, self.params)
        rec.gamma_lp = {p: lp_norm(gamma, p) for p in cfg.p_list}
        rec.gamma_lp.setdefault(2.0, math.sqrt(spectral_energy(gamma)))
        partition = make_partition(state.grid)
        rec.besov_neg = {
            s: besov_norm((state.u, state.tau), -s, 2.0, math.inf, homogeneous=True, partition=partition)
            for s in cfg.sigma_list
        }
        current = rec.besov_neg[cfg.sigma_list[0]]
        self._m_sigma = current if self._m_sigma is None else max(self._m_sigma, current)
        rec.besov_m_sigma = self._m_sigma
        b0 = b0_infty1_norm(state.tau, partition)
        if self._last_heavy is not None:
            t_prev, b0_prev = self._last_heavy
            self._b0_integral += _interval_integral(state.t - t_prev, b0_prev, b0)
        self._last_heavy = (state.t, b0)
        rec.b0_infty1_tau_integral = self._b0_integral


def _b1_integrand(rec: DiagnosticsRecord) -> float:
    return rec.l2_u ** 3 + rec.l2_u ** 2 * rec.l2_tau ** 2


def _b2_integrand(rec: DiagnosticsRecord) -> float:
    return rec.grad_l2_u * rec.l2_tau * rec.tau_hat_l1_splitting


def _b2_tilde_integrand(rec: DiagnosticsRecord) -> float:
    return rec.grad_l2_u * rec.l2_tau ** 2


def _weighted_dissipation(rec: DiagnosticsRecord, a: float) -> Tuple[float, Optional[float]]:
    """e^{2as}|grad tau|^2 and its time derivative when the record carries the rate."""
    weight = math.exp(2.0 * a * rec.t)
    value = weight * rec.tau_dissipation
    if rec.tau_dissipation_rate is None:
        return value, None
    return value, weight * (2.0 * a * rec.tau_dissipation + rec.tau_dissipation_rate)


# --- History checks ---

def _require_history(history: Sequence[DiagnosticsRecord]) -> None:
    if not history:
        raise ContractViolation("diagnostics history is empty")


def tau_energy_identity(history: Sequence[DiagnosticsRecord], params: ModelParams) -> float:
    """Max over records of |e^{2at}|tau|^2 + 2 mu int e^{2as}|grad tau|^2 - |tau0|^2| / |tau0|^2."""
    if params.rotation_mode != "corotation" or params.alpha != 0.0:
        raise ContractViolation("the tau energy identity holds for co-rotation runs with alpha = 0")
    _require_history(history)
    times = [r.t for r in history]
    pairs = [_weighted_dissipation(r, params.a) for r in history]
    rates = [d for _, d in pairs] if all(d is not None for _, d in pairs) else None
    integral = _cumulative(times, [g for g, _ in pairs], rates)
    tau0_sq = history[0].l2_tau ** 2
    worst = 0.0
    for rec, acc in zip(history, integral):
        lhs = math.exp(2.0 * params.a * rec.t) * rec.l2_tau ** 2 + 2.0 * params.mu * acc
        worst = max(worst, _relative(lhs - tau0_sq, tau0_sq))
    return worst


def tau_lp_decay_check(history: Sequence[DiagnosticsRecord], params: ModelParams,
                       p_list: Sequence[float] = (2.0, 4.0, math.inf)) -> float:
    """Max over records and p of |tau(t)|_{Lp} e^{at} / |tau0|_{Lp} - 1."""
    if params.rotation_mode != "corotation" or params.alpha != 0.0:
        raise ContractViolation("the tau L^p decay bound holds for co-rotation runs with alpha = 0")
    _require_history(history)
    worst = -math.inf
    for p in p_list:
        initial = history[0].lp_norms_tau.get(p)
        if not initial:
            continue
        for rec in history:
            value = rec.lp_norms_tau.get(p)
            if value is not None:
                worst = max(worst, value * math.exp(params.a * rec.t) / initial - 1.0)
    return 0.0 if worst == -math.inf else worst


def velocity_energy_balance(history: Sequence[DiagnosticsRecord], params: ModelParams) -> float:
    """Max relative residual of |u|^2 - |u0|^2 - 2 int <u, div tau> + 2 nu int |grad u|^2."""
    _require_history(history)
    times = [r.t for r in history]
    rates = [r.coupling_work_rate for r in history]
    work = _cumulative(times, [r.coupling_work for r in history], rates if None not in rates else None)
    visc = _cumulative(times, [r.grad_l2_u ** 2 for r in history])
    u0_sq = history[0].l2_u ** 2
    worst = 0.0
    for rec, w, v in zip(history, work, visc):
        balance = rec.l2_u ** 2 - u0_sq - 2.0 * w + 2.0 * params.nu * v
        worst = max(worst, _relative(balance, max(u0_sq, rec.l2_u ** 2)))
    return worst


def velocity_l2_bound_check(history: Sequence[DiagnosticsRecord]) -> float:
    """Max over records of |u(t)| - (|u0| + |tau0|); nonpositive when the bound holds."""
    _require_history(history)
    bound = history[0].l2_u + history[0].l2_tau
    return max(rec.l2_u - bound for rec in history)


def accumulate_B1_B2(history: Sequence[DiagnosticsRecord]) -> Tuple[float, float]:
    if not history:
        return 0.0, 0.0
    times = [r.t for r in history]
    b1 = _cumulative(times, [_b1_integrand(r) for r in history])[-1]
    b2 = _cumulative(times, [_b2_integrand(r) for r in history])[-1]
    return b1, b2


def _quantity(rec: DiagnosticsRecord, quantity: str) -> float:
    if quantity == "l2_pair":
        return math.sqrt(rec.l2_u ** 2 + rec.l2_tau ** 2)
    if quantity == "grad_pair":
        return math.sqrt(rec.grad_l2_u ** 2 + rec.grad_l2_tau ** 2)
    value = rec.to_values().get(quantity)
    if value is None:
        raise FitError(f"quantity '{quantity}' is not available on the records")
    return value


def decay_exponent_fit(history: Sequence[DiagnosticsRecord], quantity: str,
                       window: Tuple[float, float]) -> FitResult:
    """Least-squares slope of log(quantity) against log(1+t) inside ``window``."""
    t0, t1 = window
    if not t1 > t0:
        raise FitError(f"fit window [{t0}, {t1}] is empty")
    selected = [r for r in history if t0 <= r.t <= t1]
    if len(selected) < MIN_FIT_POINTS:
        raise FitError(f"fit window [{t0}, {t1}] holds {len(selected)} records, need at least {MIN_FIT_POINTS}")
    values = np.array([_quantity(r, quantity) for r in selected])
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise FitError(f"'{quantity}' has nonpositive or non-finite values in [{t0}, {t1}]")
    x = np.log1p(np.array([r.t for r in selected]))
    result = linregress(x, np.log(values))
    return FitResult(float(result.slope), float(result.rvalue ** 2))


def negative_besov_sup(history: Sequence[DiagnosticsRecord], sigma: float) -> float:
    """M_sigma: running max of |(u, tau)| in the homogeneous B^{-sigma}_{2,inf} norm."""
    values = [r.besov_neg[sigma] for r in history if sigma in r.besov_neg]
    if not values:
        values = [r.besov_m_sigma for r in history if r.besov_m_sigma is not None]
    return max(values) if values else 0.0


def _require_noncorotation(params: ModelParams) -> None:
    if params.rotation_mode != "full":
        raise ContractViolation("the E_eta monotonicity check applies to noncorotation runs")


def _e_eta(rec: DiagnosticsRecord, eta: float) -> float:
    if rec.eta == eta:
        return rec.e_eta
    return rec.e0 - eta * rec.pairing


def monotonicity_check_E_eta(history: Sequence[DiagnosticsRecord], params: ModelParams,
                             eta: float) -> float:
    """Max over consecutive records of (E_eta(t_{k+1}) - E_eta(t_k)) / dt; 0 if never increasing."""
    _require_noncorotation(params)
    worst = 0.0
    for prev, rec in zip(history, history[1:]):
        h = rec.t - prev.t
        if h > 0:
            worst = max(worst, (_e_eta(rec, eta) - _e_eta(prev, eta)) / h)
    return worst


def dissipative_monotonicity_check(history: Sequence[DiagnosticsRecord], params: ModelParams,
                                   eta: float) -> float:
    """Like monotonicity_check_E_eta but adds the dissipation (eta/8)|grad u|^2 + (1/2)|grad tau|_{H1}^2."""
    _require_noncorotation(params)

    def dissipation(r):
        return eta / 8.0 * r.grad_l2_u ** 2 + 0.5 * (r.tau_dissipation + r.hess_l2_tau_sq)

    worst = 0.0
    for prev, rec in zip(history, history[1:]):
        h = rec.t - prev.t
        if h > 0:
            increment = _e_eta(rec, eta) - _e_eta(prev, eta) + _interval_integral(h, dissipation(prev), dissipation(rec))
            worst = max(worst, increment / h)
    return worst


def gradient_energy_constant(history: Sequence[DiagnosticsRecord]) -> float:
    """Smallest C with d/dt|grad(u,tau)|^2 + |grad^2 tau|^2 <= C |grad u|^2 |tau|_{H1}^2 on the records."""
    worst = 0.0
    for prev, rec in zip(history, history[1:]):
        h = rec.t - prev.t
        if h <= 0:
            continue
        lhs = (rec.e1 - prev.e1) / h + 0.5 * (rec.hess_l2_tau_sq + prev.hess_l2_tau_sq)
        denominator = 0.5 * (rec.grad_l2_u ** 2 * rec.h1_tau ** 2 + prev.grad_l2_u ** 2 * prev.h1_tau ** 2)
        if denominator > 1e-300:
            worst = max(worst, lhs / denominator)
    return worst

