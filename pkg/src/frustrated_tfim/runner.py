"""Scenario execution: config -> cells -> report.json + flat CSV tables.

A cell is one unit of independent work (typically one field value, or one
field value and ansatz).  Each cell gets its own seed derived from the config
seed and its index, so results do not depend on how cells are scheduled.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import ansatz as az
from . import observables as ob
from . import spectra as sp
from . import variational as va
from .ansatz import AnsatzSpec, Sector
from .hamiltonian import IsingHamiltonian, classical_ground
from .lattice import AnsatzKind, Coupling, LatticeSpec, build_lattice

log = logging.getLogger(__name__)

OUT_ENV = "FRUSTRATED_TFIM_OUT"
STATE_BUFFERS = 6   # complex state-sized arrays alive during one gradient evaluation


class ResourceError(RuntimeError):
    """A size/memory guard refused the requested work."""


class CellFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def cell_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _graph(cfg):
    lat = cfg["lattice"]
    return build_lattice(LatticeSpec(lat["L"], lat["frustrated"], Coupling(lat["coupling"])))


def _optimizer(cfg, seed):
    o = cfg["optimizer"]
    return va.OptimizerConfig(method=o["method"], max_iter=o["max_iter"],
                              gradient_tol=o["gradient_tol"], restarts=o["restarts"],
                              seed=seed, init_scale=o["init_scale"],
                              zero_start=o["zero_start"])


def _kinds(cfg):
    return [AnsatzKind(k) for k in cfg["ansatz"]["kinds"]]


def _krylov_config(cfg, H):
    k = cfg["krylov"]
    dtype = np.float32 if k["precision"] == "single" else np.float64
    refs = sp.default_references(H, k["n_classical"], dtype=dtype)
    return sp.KrylovConfig(refs, k["dimension"], precision=k["precision"],
                           memory_budget=cfg["resources"]["memory_budget"])


def check_resources(cfg) -> None:
    """Refuse work that the configured guards do not allow, before anything runs."""
    n = cfg["lattice"]["L"] ** 2
    res = cfg["resources"]
    method = cfg["reference"]
    scen = cfg["scenario"]
    if method == "dense" and n > sp.DENSE_MAX_SITES:
        raise ResourceError(f"dense ED refused for N={n} > {sp.DENSE_MAX_SITES}")
    if scen == "ed" or method in ("auto", "lanczos"):
        if n > sp.LANCZOS_MAX_SITES and not res["allow_large"]:
            raise ResourceError(f"Lanczos refused for N={n} > {sp.LANCZOS_MAX_SITES}; "
                                "set resources.allow_large to override")
    state_bytes = 16 * (1 << n)
    if scen != "ed" and scen != "krylov" and STATE_BUFFERS * state_bytes > res["memory_budget"]:
        raise ResourceError(f"N={n} needs ~{STATE_BUFFERS * state_bytes / 1e9:.1f} GB of "
                            f"statevectors, budget is {res['memory_budget'] / 1e9:.1f} GB")
    if scen == "krylov" or method == "krylov":
        k = cfg["krylov"]
        item = 4 if k["precision"] == "single" else 8
        need = k["dimension"] * (1 << n) * item
        if need > res["memory_budget"]:
            raise ResourceError(f"Krylov basis D={k['dimension']} at N={n} needs "
                                f"{need / 1e9:.1f} GB, budget is {res['memory_budget'] / 1e9:.1f} GB")


def _reference(cfg, H, need_vectors=True):
    """Exact (or best available) reference for this Hamiltonian, or None."""
    method = cfg["reference"]
    n = H.n_sites
    k = cfg["n_eigenvalues"]
    if method == "none":
        return None
    if method == "krylov":
        return sp.krylov_rayleigh_ritz(H, _krylov_config(cfg, H))
    if method == "dense" or (method == "auto" and n <= sp.DENSE_MAX_SITES):
        return sp.dense_spectrum(H, k=max(k, 8))
    if n <= sp.LANCZOS_MAX_SITES:
        return sp.lanczos_lowest(H, k=k)
    return sp.lanczos_ground_energy(H, allow_large=cfg["resources"]["allow_large"])


def _has_vectors(ref):
    return ref is not None and ref.eigenvectors is not None


def _ed_gap(ref):
    if ref is None or len(ref.eigenvalues) < 2:
        return None
    return sp.excitation_gap(ref)


def _num(x):
    if x is None:
        return None
    if isinstance(x, (np.integer,)):
        return int(x)
    return float(x)


def _trace_rows(res):
    return [{"iteration": i, "energy": float(e), "gradient_norm": float(g), "n_evals": int(n)}
            for i, (e, g, n) in enumerate(zip(res.energy_trace, res.gradnorm_trace,
                                               res.eval_trace))]


def _vqe_summary(res, report):
    return {
        "energy": float(res.best_energy),
        "fidelity": _num(res.fidelity),
        "final_gradient_norm": res.final_gradient_norm,
        "n_evaluations": int(res.n_evaluations),
        "iterations": len(res.energy_trace) - 1,
        "converged": bool(res.converged),
        "params": [float(x) for x in res.best_params],
        "restarts": [{"index": r.index, "start": r.start, "energy": _num(r.energy),
                      "iterations": r.iterations, "evaluations": r.evaluations,
                      "fidelity": _num(r.fidelity), "error": r.error} for r in res.restarts],
        "gate_counts": az.gate_counts(res.spec),
        "observables": report.to_dict() if report is not None else None,
    }


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------

def _cells(cfg):
    scen = cfg["scenario"]
    hs = cfg["h_values"]
    kinds = _kinds(cfg)
    ps = cfg["ansatz"]["p_values"]
    if scen in ("ed", "krylov", "scan", "corr"):
        return [{"h": h} for h in hs]
    if scen == "depth-scan":
        return [{"h": h, "kind": k.value} for h in hs for k in kinds]
    return [{"h": h, "kind": k.value, "p": p} for h in hs for k in kinds for p in ps]


def _cell_ed(cfg, cell, seed):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    ref = _reference(cfg, H)
    L = g.L
    out = {"E0": ref.ground_energy, "gap": _ed_gap(ref), "method": ref.method,
           "eigenvalues": [float(e) for e in ref.eigenvalues[:cfg["n_eigenvalues"]]]}
    if g.n_sites <= 24:
        info = classical_ground(g)
        out["classical_energy"] = info.energy
        out["classical_degeneracy"] = info.degeneracy
    rows = [r for r in ref.rows(L, cell["h"]) if r["index"] < cfg["n_eigenvalues"]]
    return out, {"spectrum": rows}


def _spec(cfg, g, kind, p, sector=None):
    sector = sector or cfg["ansatz"].get("sector")
    if kind is AnsatzKind.HEA and sector in ("even", "odd"):
        sector = None
    return AnsatzSpec(kind, g, p, sector)


def _cell_vqe(cfg, cell, seed):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    ref = _reference(cfg, H)
    spec = _spec(cfg, g, AnsatzKind(cell["kind"]), cell["p"])
    res = va.run_vqe(spec, H, _optimizer(cfg, seed), ref if _has_vectors(ref) else None)
    report = ob.compile_report(res, ref, g)
    summary = _vqe_summary(res, report)
    summary["E0"] = _num(ref.ground_energy) if ref is not None else None
    row = {"h": cell["h"], "kind": cell["kind"], "p": cell["p"], "energy": res.best_energy,
           "E0": summary["E0"], "energy_error": report.energy_error,
           "relative_energy_error": report.relative_energy_error,
           "fidelity": report.fidelity, "final_gradient_norm": res.final_gradient_norm,
           "cnots": az.cnots(spec), "n_evaluations": res.n_evaluations,
           "converged": res.converged}
    trace = [dict({"h": cell["h"], "kind": cell["kind"], "p": cell["p"]}, **r)
             for r in _trace_rows(res)]
    return summary, {"vqe": [row], "trace": trace}


def _cell_gradnorm(cfg, cell, seed):
    summary, tables = _cell_vqe(cfg, cell, seed)
    return summary, {"gradnorm": tables["trace"], "vqe": tables["vqe"]}


def _cell_vqd(cfg, cell, seed):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    ref = _reference(cfg, H)
    kind = AnsatzKind(cell["kind"])
    opt = _optimizer(cfg, seed)
    ground = va.run_vqe(_spec(cfg, g, kind, cell["p"], "even" if kind is not AnsatzKind.HEA
                              else None), H, opt, ref if _has_vectors(ref) else None)
    betas = cfg["vqd"]["beta"]
    betas = betas if isinstance(betas, list) else [betas]
    spec = AnsatzSpec(kind, g, cell["p"], Sector.NONE)
    rows, runs = [], []
    for beta in betas:
        res = va.run_vqd(spec, H, va.VQDConfig(beta, [ground.state], opt),
                         ref if _has_vectors(ref) else None)
        gap = res.best_energy - ground.best_energy
        overlap = float(abs(np.vdot(ground.state, res.state)) ** 2)
        rows.append({"h": cell["h"], "kind": cell["kind"], "p": cell["p"], "beta": beta,
                     "E0_vqe": ground.best_energy, "E1_vqd": res.best_energy,
                     "gap_vqd": gap, "gap_ed": _ed_gap(ref), "overlap": overlap,
                     "fidelity_excited": res.fidelity})
        runs.append({"beta": beta, "energy": res.best_energy, "gap": gap, "overlap": overlap,
                     "fidelity_excited": _num(res.fidelity),
                     "params": [float(x) for x in res.best_params]})
    out = {"ground": _vqe_summary(ground, None), "vqd": runs, "gap_ed": _ed_gap(ref)}
    return out, {"vqd": rows}


def _cell_gap(cfg, cell, seed):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    ref = _reference(cfg, H)
    kind = AnsatzKind(cell["kind"])
    gap = va.symmetry_resolved_gap(g, cell["h"], cell["p"], _optimizer(cfg, seed), kind, H=H)
    row = {"h": cell["h"], "kind": cell["kind"], "p": cell["p"], "E_even": gap.E_even,
           "E_odd": gap.E_odd, "gap": gap.gap, "gap_ed": _ed_gap(ref),
           "E0_ed": _num(ref.eigenvalues[0]) if ref is not None else None,
           "E1_ed": _num(ref.eigenvalues[1]) if ref is not None and len(ref.eigenvalues) > 1
           else None}
    out = dict(row)
    out["even_params"] = [float(x) for x in gap.even.best_params]
    out["odd_params"] = [float(x) for x in gap.odd.best_params]
    return out, {"gap": [row]}


def _cell_krylov(cfg, cell, seed):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    kcfg = _krylov_config(cfg, H)
    dims = cfg["krylov"].get("dims") or list(range(1, kcfg.dimension + 1))
    trace = sp.krylov_trace(H, kcfg, dims)
    del kcfg
    ref = None if cfg["reference"] in ("krylov", "none") else _reference(cfg, H)
    e_ref = ref.ground_energy if ref is not None else None
    rows = [{"h": cell["h"], "D": d, "E_rr": e, "E_ref": e_ref,
             "error": None if e_ref is None else e - e_ref} for d, e in trace]
    out = {"trace": [[d, e] for d, e in trace], "E_ref": e_ref,
           "reference_method": ref.method if ref is not None else None}
    return out, {"krylov": rows}


def _cell_scan(cfg, cell, seed, with_corr=False):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    ref = _reference(cfg, H)
    rows, corr, out = [], [], {}
    if _has_vectors(ref):
        rep = ob.compile_report(ref.eigenvectors[0], ref, g, gap=_ed_gap(ref), H=H)
        rows.append(dict({"h": cell["h"], "source": "ed"}, **_obs_row(rep)))
        corr.append(({"h": cell["h"], "source": "ed"}, rep.bond_correlations))
        out["ed"] = rep.to_dict()
    for k in _kinds(cfg):
        for p in cfg["ansatz"]["p_values"]:
            res = va.run_vqe(_spec(cfg, g, k, p), H, _optimizer(cfg, seed),
                             ref if _has_vectors(ref) else None)
            rep = ob.compile_report(res, ref, g)
            src = f"{k.value}:p{p}"
            rows.append(dict({"h": cell["h"], "source": src}, **_obs_row(rep)))
            corr.append(({"h": cell["h"], "source": src}, rep.bond_correlations))
            out[src] = _vqe_summary(res, rep)
    tables = {"scan": rows}
    if with_corr:
        tables = {"correlations": [
            dict(label, i=e.i, j=e.j, kind=e.kind.value, value=float(c))
            for label, cs in corr for e, c in cs]}
    return out, tables


def _obs_row(rep):
    return {"energy": rep.energy, "energy_error": rep.energy_error, "fidelity": rep.fidelity,
            "susceptibility": rep.susceptibility, "entropy": rep.entropy,
            "magnetization": rep.magnetization}


def _cell_corr(cfg, cell, seed):
    return _cell_scan(cfg, cell, seed, with_corr=True)


def _cell_depth(cfg, cell, seed):
    g = _graph(cfg)
    H = IsingHamiltonian(g, cell["h"])
    ref = _reference(cfg, H)
    if not _has_vectors(ref):
        raise CellFailure("depth scan needs a reference with eigenvectors")
    kind = AnsatzKind(cell["kind"])
    ds = cfg["depth_scan"]
    spec = _spec(cfg, g, kind, 1)
    search = va.min_depth_search(spec, H, ds["target"], ds["p_max"], _optimizer(cfg, seed), ref)
    rows = [{"h": cell["h"], "kind": cell["kind"], "p": p, "fidelity": search.fidelities[p],
             "energy": search.energies[p], "cnots": az.cnots(spec.with_depth(p))}
            for p in sorted(search.fidelities)]
    pmin = search.p_min
    summary = {"h": cell["h"], "kind": cell["kind"], "p_min": pmin,
               "cnots": az.cnots(spec.with_depth(pmin)) if pmin else None,
               "target": ds["target"], "p_max": ds["p_max"]}
    return dict(summary, fidelities={str(p): f for p, f in search.fidelities.items()}), \
        {"depth_scan": rows, "pmin": [summary]}


_RUNNERS = {"ed": _cell_ed, "vqe": _cell_vqe, "vqd": _cell_vqd, "gap": _cell_gap,
            "krylov": _cell_krylov, "scan": _cell_scan, "corr": _cell_corr,
            "depth-scan": _cell_depth, "gradnorm": _cell_gradnorm}


def _run_one(args):
    cfg, index, cell = args
    seed = cell_seed(cfg["seed"], index)
    t0 = time.perf_counter()
    try:
        out, tables = _RUNNERS[cfg["scenario"]](cfg, cell, seed)
        err = None
    except (ResourceError, MemoryError):
        raise
    except Exception as exc:  # one failed cell must not sink the sweep
        log.exception("cell %d %s failed", index, cell)
        out, tables, err = None, {}, f"{type(exc).__name__}: {exc}"
    return {"index": index, "cell": cell, "seed": seed, "result": out, "error": err,
            "seconds": time.perf_counter() - t0}, tables


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(rows) -> str:
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)

    class _Buf(list):
        def write(self, s):
            self.append(s)

    buf = _Buf()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(r.get(k)) for k in cols})
    return "".join(buf)


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_table(path) -> list[dict]:
    """Parse a table written by ``run_scenario``; numbers come back as int/float, blanks as None."""
    def conv(s):
        if s == "":
            return None
        if s in ("True", "False"):
            return s == "True"
        for t in (int, float):
            try:
                return t(s)
            except ValueError:
                pass
        return s
    with open(path, newline="") as fh:
        return [{k: conv(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def output_root(cfg, override=None) -> Path:
    if override:
        return Path(override)
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    base = Path(os.environ.get(OUT_ENV, "runs"))
    name = cfg.get("name") or f"{cfg['scenario']}-L{cfg['lattice']['L']}"
    return base / name


def run_scenario(cfg: dict, out_dir=None, jobs: int | None = None) -> dict:
    """Run every cell of a validated config and write report.json plus CSV tables."""
    check_resources(cfg)
    out = output_root(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs or cfg["resources"]["jobs"]
    cells = _cells(cfg)
    args = [(cfg, i, c) for i, c in enumerate(cells)]
    t0 = time.perf_counter()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, args))
    else:
        results = [_run_one(a) for a in args]
    tables: dict[str, list] = {}
    records = []
    for rec, tab in results:   # assembled in cell order whatever the schedule
        records.append(rec)
        for name, rows in tab.items():
            tables.setdefault(name, []).extend(rows)
    files = {}
    for name, rows in tables.items():
        path = out / f"{name}.csv"
        _atomic_write(path, _csv_text(rows))
        files[name] = path.name
    failures = [{"index": r["index"], "cell": r["cell"], "error": r["error"]}
                for r in records if r["error"]]
    report = {
        "schema_version": 1,
        "software_version": __version__,
        "scenario": cfg["scenario"],
        "config": cfg,
        "status": "failed" if failures else "ok",
        "cells": [{k: v for k, v in r.items() if k != "seconds"} for r in records],
        "tables": files,
        "failures": failures,
        "timings": {"total_seconds": time.perf_counter() - t0,
                    "cells": [r["seconds"] for r in records], "jobs": jobs},
    }
    _atomic_write(out / "report.json",
                  json.dumps(report, indent=2, default=_json_default) + "\n")
    report["output_dir"] = str(out)
    return report


def report_payload(report: dict) -> dict:
    """The deterministic part of a report (everything except timings and location)."""
    return {k: v for k, v in report.items() if k not in ("timings", "output_dir")}
