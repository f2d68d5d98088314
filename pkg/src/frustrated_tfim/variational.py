"""VQE, VQD, symmetry-resolved gaps and minimum-depth search.

The optimizer consumes exact gradients from adjoint differentiation, which is
cross-checked against the parameter-shift rule (``gradient_parameter_shift``)
in the test suite.  Every restart is seeded from ``(seed, restart)`` so sweeps
are reproducible regardless of scheduling.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import ansatz as az
from .ansatz import AnsatzKind, AnsatzSpec, Sector
from .hamiltonian import IsingHamiltonian, expectation, parity_expectation
from .spectra import SpectrumResult

log = logging.getLogger(__name__)

QUASI_NEWTON = ("lbfgs", "slsqp")
DERIVATIVE_FREE = ("nelder-mead", "cobyla")
_ALIASES = {"quasi_newton": "lbfgs", "derivative_free": "nelder-mead",
            "l-bfgs-b": "lbfgs", "neldermead": "nelder-mead"}


@dataclass
class OptimizerConfig:
    method: str = "lbfgs"
    max_iter: int = 1000
    gradient_tol: float = 1e-7
    restarts: int = 10
    seed: int = 0
    init_scale: float = 0.1
    zero_start: bool = True
    bounds: tuple | None = None

    def __post_init__(self):
        self.method = _ALIASES.get(self.method.lower(), self.method.lower())
        if self.method not in QUASI_NEWTON + DERIVATIVE_FREE:
            raise ValueError(f"unknown optimizer {self.method!r}")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")

    @property
    def uses_gradient(self) -> bool:
        return self.method in QUASI_NEWTON


@dataclass
class RestartRecord:
    index: int
    start: str
    energy: float
    iterations: int
    evaluations: int
    fidelity: float | None = None
    error: str | None = None


@dataclass
class VQEResult:
    spec: AnsatzSpec
    best_energy: float
    best_params: np.ndarray
    energy_trace: np.ndarray
    gradnorm_trace: np.ndarray
    eval_trace: np.ndarray
    n_evaluations: int
    converged: bool
    fidelity: float | None = None
    state: np.ndarray | None = None
    cost: float | None = None
    restarts: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def final_gradient_norm(self) -> float:
        return float(self.gradnorm_trace[-1]) if len(self.gradnorm_trace) else float("nan")


@dataclass
class VQDConfig:
    beta: float
    prior_states: list
    inner: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"VQD penalty must be >= 0, got {self.beta}")
        for s in self.prior_states:
            if abs(np.linalg.norm(s) - 1.0) > 1e-8:
                raise ValueError("prior states must be normalized")


def gradient_norm(gradient) -> float:
    return float(np.linalg.norm(np.asarray(gradient, dtype=float)))


def energy_objective(spec: AnsatzSpec, theta, H: IsingHamiltonian) -> float:
    return expectation(H, az.prepare_state(spec, theta))


def _finish(spec, psi, theta, layer_index, layer, start):
    for g in layer[start:]:
        az.apply_gate(psi, g, theta)
    for k in range(layer_index + 1, spec.p):
        if spec.kind is AnsatzKind.HEA:
            for g in az.gate_program(spec)[k]:
                az.apply_gate(psi, g, theta)
        else:
            az._apply_layer(spec, psi, theta, k)
    return psi


def gradient_parameter_shift(spec: AnsatzSpec, theta, H: IsingHamiltonian) -> np.ndarray:
    """Two-point shift rule applied gate by gate.

    Every rotation is ``exp(-i a P)`` with ``a = coeff * theta[param]``, so
    ``dE/da = E(a + pi/4) - E(a - pi/4)``; parameters shared by several gates sum
    the per-gate contributions.
    """
    theta = az._check_theta(spec, theta)
    grad = np.zeros_like(theta)
    psi = az.initial_state(spec)
    for k, layer in enumerate(az.gate_program(spec)):
        for g_idx, gate in enumerate(layer):
            if gate.param >= 0:
                diff = 0.0
                for sign in (1.0, -1.0):
                    phi = psi.copy()
                    az.apply_gate(phi, gate, theta, sign * az.SHIFT)
                    _finish(spec, phi, theta, k, layer, g_idx + 1)
                    diff += sign * expectation(H, phi, check=False)
                grad[gate.param] += gate.coeff * diff
            az.apply_gate(psi, gate, theta)
    return grad


def gradient_finite_difference(spec, theta, H, step=1e-5) -> np.ndarray:
    theta = az._check_theta(spec, theta)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        grad[i] = (energy_objective(spec, theta + e, H)
                   - energy_objective(spec, theta - e, H)) / (2 * step)
    return grad


def degenerate_fidelity(psi: np.ndarray, reference: SpectrumResult, tol: float = 1e-8) -> float:
    """Weight of ``psi`` in the (possibly degenerate) exact ground space."""
    space = reference.ground_space(tol)
    return float(np.sum(np.abs(space.conj() @ psi) ** 2))


class _Objective:
    """Energy (+ optional overlap penalty) with gradient memo and telemetry."""

    def __init__(self, spec, H, penalty=(), parity=None):
        self.spec, self.H = spec, H
        self.penalty = [(float(w), np.asarray(v)) for w, v in penalty]
        self.parity = parity
        self.n_evals = 0
        self._key = None

    def _evaluate(self, x):
        key = x.tobytes()
        if key == self._key:
            return
        cost, grad, psi = az.energy_and_gradient(self.spec, x, self.H, self.penalty)
        if not np.isfinite(cost):
            raise FloatingPointError(f"non-finite objective {cost}")
        energy = cost - sum(w * abs(np.vdot(v, psi)) ** 2 for w, v in self.penalty)
        if self.parity is not None:
            par = parity_expectation(psi)
            if abs(par - self.parity) > 1e-10:
                raise AssertionError(f"state left its parity sector: <P> = {par}")
        self.n_evals += 1
        self._key, self.cost, self.energy, self.grad, self.psi = key, cost, energy, grad, psi

    def fun(self, x):
        self._evaluate(x)
        return self.cost

    def jac(self, x):
        self._evaluate(x)
        return self.grad


def _starts(spec, opt, warm):
    starts = []
    for w in warm or ():
        starts.append(("warm", np.asarray(w, dtype=float)))
    if opt.zero_start:
        z = np.zeros(spec.n_params)
        if spec.mixing:
            z[-1] = math.pi / 4
        starts.append(("zero", z))
    for r in range(opt.restarts):
        rng = np.random.default_rng([opt.seed, r])
        starts.append((f"random:{r}", az.random_parameters(spec, rng, opt.init_scale)))
    return starts


def _minimize(obj, x0, opt):
    """One local optimization; returns (x, energy, iteration trace, success)."""
    trace = []

    def record(xk):
        obj._evaluate(np.asarray(xk, dtype=float))
        trace.append((obj.cost, obj.energy, gradient_norm(obj.grad), obj.n_evals))

    record(x0)
    bounds = None if opt.bounds is None else [opt.bounds] * x0.size
    if opt.method == "lbfgs":
        res = scipy.optimize.minimize(
            obj.fun, x0, jac=obj.jac, method="L-BFGS-B", bounds=bounds, callback=record,
            options={"maxiter": opt.max_iter, "gtol": opt.gradient_tol, "ftol": 1e-15,
                     "maxcor": 30})
    elif opt.method == "slsqp":
        res = scipy.optimize.minimize(
            obj.fun, x0, jac=obj.jac, method="SLSQP", bounds=bounds, callback=record,
            options={"maxiter": opt.max_iter, "ftol": 1e-14})
    elif opt.method == "nelder-mead":
        res = scipy.optimize.minimize(
            obj.fun, x0, method="Nelder-Mead", bounds=bounds, callback=record,
            options={"maxiter": opt.max_iter, "adaptive": True,
                     "xatol": 1e-10, "fatol": 1e-12})
    else:
        res = scipy.optimize.minimize(
            obj.fun, x0, method="COBYLA", options={"maxiter": opt.max_iter, "rhobeg": 0.2,
                                                   "tol": 1e-10}, callback=record)
    x = np.asarray(res.x, dtype=float)
    obj._evaluate(x)
    return x, trace, bool(res.success)


def _optimize(spec, H, opt, penalty=(), reference=None, warm=None, stop_fidelity=None,
              check_parity=True):
    t0 = time.perf_counter()
    parity = None
    if check_parity and az.preserves_parity(spec) and spec.n_qubits <= 16:
        parity = -1.0 if spec.sector is Sector.ODD else 1.0
    best = None
    records = []
    total_evals = 0
    for idx, (label, x0) in enumerate(_starts(spec, opt, warm)):
        obj = _Objective(spec, H, penalty, parity)
        try:
            x, trace, ok = _minimize(obj, x0, opt)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("restart %s aborted: %s", label, exc)
            records.append(RestartRecord(idx, label, float("nan"), 0, obj.n_evals,
                                         error=str(exc)))
            total_evals += obj.n_evals
            continue
        total_evals += obj.n_evals
        fid = degenerate_fidelity(obj.psi, reference) if _has_vectors(reference) else None
        records.append(RestartRecord(idx, label, obj.energy, len(trace) - 1, obj.n_evals, fid))
        cand = dict(cost=obj.cost, energy=obj.energy, x=x, trace=trace, psi=obj.psi.copy(),
                    fid=fid, ok=ok or gradient_norm(obj.grad) < opt.gradient_tol * 10)
        if best is None or cand["cost"] < best["cost"]:
            best = cand
        if stop_fidelity is not None and fid is not None and fid >= stop_fidelity:
            break
    if best is None:
        raise RuntimeError("every restart failed")
    tr = np.array(best["trace"])
    return VQEResult(
        spec=spec, best_energy=best["energy"], best_params=best["x"],
        energy_trace=tr[:, 1], gradnorm_trace=tr[:, 2], eval_trace=tr[:, 3].astype(int),
        n_evaluations=total_evals, converged=best["ok"], fidelity=best["fid"],
        state=best["psi"], cost=best["cost"], restarts=records,
        seconds=time.perf_counter() - t0)


def _has_vectors(ref):
    return ref is not None and ref.eigenvectors is not None


def run_vqe(spec: AnsatzSpec, H: IsingHamiltonian, opt: OptimizerConfig | None = None,
            reference: SpectrumResult | None = None, warm=None,
            stop_fidelity: float | None = None) -> VQEResult:
    """Best-of-restarts energy minimization.

    Starts are: any ``warm`` parameter vectors, the all-zero point (if enabled),
    then ``opt.restarts`` seeded uniform draws in ``[-init_scale, init_scale]``.
    """
    if spec.n_qubits != H.n_sites:
        raise ValueError("ansatz and Hamiltonian act on different numbers of sites")
    opt = opt or OptimizerConfig()
    return _optimize(spec, H, opt, reference=reference, warm=warm, stop_fidelity=stop_fidelity)


def run_vqd(spec: AnsatzSpec, H: IsingHamiltonian, cfg: VQDConfig,
            reference: SpectrumResult | None = None, warm=None) -> VQEResult:
    """Minimize E + beta * sum_m |<psi|psi_m>|^2; ``best_energy`` is the bare energy.

    The returned ``fidelity`` is the weight on the first excited eigenvector of
    ``reference`` (when it has vectors) rather than on the ground space.
    """
    penalty = [(cfg.beta, v) for v in cfg.prior_states] if cfg.beta > 0 else []
    res = _optimize(spec, H, cfg.inner, penalty=penalty, reference=None, warm=warm)
    if _has_vectors(reference) and len(reference.eigenvectors) > 1:
        res.fidelity = float(abs(np.vdot(reference.eigenvectors[1], res.state)) ** 2)
    return res


@dataclass
class SectorGap:
    even: VQEResult
    odd: VQEResult

    @property
    def E_even(self) -> float:
        return self.even.best_energy

    @property
    def E_odd(self) -> float:
        return self.odd.best_energy

    @property
    def gap(self) -> float:
        return abs(self.E_even - self.E_odd)


def symmetry_resolved_gap(graph, h: float, p: int, opt: OptimizerConfig | None = None,
                          kind: AnsatzKind = AnsatzKind.BOND_HVA, H=None) -> SectorGap:
    """Lowest energies of the two parity sectors; the gap is their difference."""
    kind = AnsatzKind(kind)
    if kind is AnsatzKind.HEA:
        raise ValueError("sector-resolved runs need a parity-preserving ansatz")
    H = H if H is not None else IsingHamiltonian(graph, h)
    out = {}
    for sector in (Sector.EVEN, Sector.ODD):
        spec = AnsatzSpec(kind, graph, p, sector)
        res = run_vqe(spec, H, opt)
        par = parity_expectation(res.state)
        expect = 1.0 if sector is Sector.EVEN else -1.0
        if abs(par - expect) > 1e-10:
            raise AssertionError(f"{sector.value} sector result has <P> = {par}")
        out[sector.value] = res
    return SectorGap(out["even"], out["odd"])


@dataclass
class DepthSearch:
    p_min: int | None
    fidelities: dict            # p -> best fidelity
    energies: dict              # p -> best energy
    results: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.p_min is not None


def min_depth_search(spec: AnsatzSpec, H: IsingHamiltonian, fidelity_target: float,
                     p_max: int, opt: OptimizerConfig | None = None,
                     reference: SpectrumResult | None = None, depths=None,
                     keep_results: bool = False) -> DepthSearch:
    """Smallest depth whose best-of-restarts fidelity reaches the target.

    Depths are scanned in ascending order.  The optimum at the previous depth,
    zero-padded with identity layers, is always tried first.
    """
    if not 0 < fidelity_target < 1:
        raise ValueError("fidelity target must lie in (0, 1)")
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if not _has_vectors(reference):
        raise ValueError("depth search needs a reference spectrum with eigenvectors")
    opt = opt or OptimizerConfig()
    depths = sorted(set(depths)) if depths is not None else range(1, p_max + 1)
    fids, ens, results = {}, {}, {}
    prev = None
    for p in depths:
        if p > p_max:
            break
        cur = spec.with_depth(p)
        warm = [az.pad_parameters(prev.spec, prev.best_params, cur)] if prev else None
        res = run_vqe(cur, H, opt, reference, warm=warm, stop_fidelity=fidelity_target)
        fids[p], ens[p] = res.fidelity, res.best_energy
        log.info("depth scan %s p=%d: E=%.6f f=%.5f", cur.kind.value, p, res.best_energy,
                 res.fidelity)
        if keep_results:
            results[p] = res
        if res.fidelity >= fidelity_target:
            return DepthSearch(p, fids, ens, results)
        prev = res
    return DepthSearch(None, fids, ens, results)
