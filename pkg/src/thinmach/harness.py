"""Run orchestration: configs, Mach sweeps, the dispersive bench and the
invariant suite.

A sweep executes one compressible run per (epsilon, eta) pair, evolves the
2D incompressible reference spectrally and the acoustic reference exactly,
and evaluates the relative energy against both the flat pair
(rho_tilde, v) of the limit statement (on the central compact box B and on
the full torus) and the corrected pair built from the acoustic solution.
Rows land in ``rows.csv`` (17 significant digits, byte-reproducible for a
fixed config and seed), fitted decay rates and the invariant-suite verdict
in ``summary.json``, figures next to both.
"""

from __future__ import annotations

import json
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import acoustic, compressible, figures, incompressible
from .grids import Grid2D, Grid3D, ScalarField2D, ScalarField3D, VectorField2D, VectorField3D, norm
from .initialdata import (
    DataRecipe,
    HarmonicProfile,
    RecipeError,
    acoustic_initial,
    build_initial_3d,
    limit_initial_2d,
)
from .pressure import check_hypotheses, make_law, relative_potential
from .relenergy import (
    Box2D,
    EnsembleMeasure,
    corrected_reference,
    flat_reference,
    relative_energy,
    uniform_bound_report,
)

__all__ = [
    "RunConfig",
    "ConfigError",
    "ConvergenceRow",
    "SweepResult",
    "ValidationReport",
    "CSV_HEADER",
    "DEFAULT_CONFIG",
    "run_single",
    "sweep",
    "acoustic_bench",
    "validate",
    "write_rows_csv",
]

CSV_HEADER = (
    "epsilon,delta,eta,tau,E_naive_B,E_naive_full,E_corrected,kinetic,"
    "pressure_ess,pressure_res,dissipation,mbar_norm,rho_ess_norm,"
    "rho_res_norm,wall_seconds"
)


class ConfigError(ValueError):
    """The run configuration violates a structural invariant."""


DEFAULT_CONFIG = {
    "grid": {"L": 24.0, "nx": 64, "ny": 64, "nz": 4},
    "law": {"kind": "gamma", "gamma": 2.0, "coefficient": 1.0, "rho_tilde": 1.0},
    "epsilon_list": [0.25, 0.125, 0.0625],
    "delta_beta": 1.0,
    "eta_list": [0.25],
    "end_time": 0.5,
    "snapshot_interval": 0.0625,
    "cfl": 0.45,
    "recipe": {
        "kind": "well-prepared",
        "v0_stream_modes": [[0, 1, 0.8, 0.0]],
        "s0_modes": [],
        "psi0_modes": [],
        "support_fraction": 0.5,
        "windowed": True,
    },
    "ensemble_size": 1,
    "ensemble_noise": 0.01,
    "seed": 0,
    "output_dir": "out",
    "record_timings": False,
    "threads": 1,
    "figures": True,
    "bench": {"q": 8.0, "p": 4.0, "k": 1, "samples": 0, "horizon": 0.0},
}


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class RunConfig:
    L: float
    nx: int
    ny: int
    nz: int
    law_params: dict
    epsilon_list: tuple
    delta_beta: float
    eta_list: tuple
    end_time: float
    snapshot_interval: float
    cfl: float
    recipe_params: dict
    ensemble_size: int
    ensemble_noise: float
    seed: int
    output_dir: str
    record_timings: bool
    threads: int
    figures: bool
    bench: dict

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        _reject_unknown(raw, DEFAULT_CONFIG, "config")
        merged = {**DEFAULT_CONFIG, **raw}
        grid = {**DEFAULT_CONFIG["grid"], **merged["grid"]}
        _reject_unknown(merged["grid"], DEFAULT_CONFIG["grid"], "grid")
        _reject_unknown(merged["recipe"], DEFAULT_CONFIG["recipe"], "recipe")
        recipe = {**DEFAULT_CONFIG["recipe"], **merged["recipe"]}
        bench = {**DEFAULT_CONFIG["bench"], **merged.get("bench", {})}
        _reject_unknown(bench, DEFAULT_CONFIG["bench"], "bench")
        return RunConfig(
            L=float(grid["L"]),
            nx=int(grid["nx"]),
            ny=int(grid["ny"]),
            nz=int(grid["nz"]),
            law_params=dict(merged["law"]),
            epsilon_list=tuple(float(e) for e in merged["epsilon_list"]),
            delta_beta=float(merged["delta_beta"]),
            eta_list=tuple(float(e) for e in merged["eta_list"]),
            end_time=float(merged["end_time"]),
            snapshot_interval=float(merged["snapshot_interval"]),
            cfl=float(merged["cfl"]),
            recipe_params=recipe,
            ensemble_size=int(merged["ensemble_size"]),
            ensemble_noise=float(merged["ensemble_noise"]),
            seed=int(merged["seed"]),
            output_dir=str(merged["output_dir"]),
            record_timings=bool(merged["record_timings"]),
            threads=int(merged["threads"]),
            figures=bool(merged["figures"]),
            bench=bench,
        )

    @staticmethod
    def from_json(path) -> "RunConfig":
        return RunConfig.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "grid": {"L": self.L, "nx": self.nx, "ny": self.ny, "nz": self.nz},
            "law": dict(self.law_params),
            "epsilon_list": list(self.epsilon_list),
            "delta_beta": self.delta_beta,
            "eta_list": list(self.eta_list),
            "end_time": self.end_time,
            "snapshot_interval": self.snapshot_interval,
            "cfl": self.cfl,
            "recipe": dict(self.recipe_params),
            "ensemble_size": self.ensemble_size,
            "ensemble_noise": self.ensemble_noise,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "record_timings": self.record_timings,
            "threads": self.threads,
            "figures": self.figures,
            "bench": dict(self.bench),
        }

    def law(self):
        return make_law(self.law_params)

    def recipe(self, epsilon, eta) -> DataRecipe:
        rp = self.recipe_params
        return DataRecipe(
            kind=rp["kind"],
            v0_stream=HarmonicProfile(tuple(tuple(m) for m in rp["v0_stream_modes"])),
            s0=HarmonicProfile(tuple(tuple(m) for m in rp["s0_modes"])),
            psi0=HarmonicProfile(tuple(tuple(m) for m in rp["psi0_modes"])),
            epsilon=epsilon,
            eta=eta,
            support_fraction=float(rp["support_fraction"]),
            windowed=bool(rp["windowed"]),
        )

    def grid3(self, epsilon) -> Grid3D:
        return Grid3D(self.nx, self.ny, self.nz, self.L, epsilon**self.delta_beta)

    def grid2(self) -> Grid2D:
        return Grid2D(self.nx, self.ny, self.L)

    def violations(self) -> list:
        """Invariant violations as human-readable strings (empty when valid)."""
        out = []
        if not self.epsilon_list:
            out.append("epsilon_list must be nonempty")
        elif any(e <= 0 for e in self.epsilon_list):
            out.append("epsilon values must be positive")
        elif any(b >= a for a, b in zip(self.epsilon_list, self.epsilon_list[1:])):
            out.append("epsilon_list must be strictly decreasing")
        if not self.eta_list or any(e <= 0 for e in self.eta_list):
            out.append("eta_list must be nonempty and positive")
        if self.end_time <= 0:
            out.append("end_time must be positive")
        if self.snapshot_interval <= 0:
            out.append("snapshot_interval must be positive")
        else:
            ratio = self.end_time / self.snapshot_interval
            if abs(ratio - round(ratio)) > 1e-9:
                out.append("snapshot_interval must divide end_time")
        if not (0.0 < self.cfl < 1.0):
            out.append(f"cfl = {self.cfl:g} outside (0, 1)")
        if self.ensemble_size < 1:
            out.append("ensemble_size must be >= 1")
        if min(self.nx, self.ny, self.nz) < 1 or self.L <= 0:
            out.append("grid dimensions must be positive")
        try:
            law = self.law()
            a = law.sound_speed
            if self.epsilon_list and self.end_time > 0:
                eps_min = min(self.epsilon_list)
                bound = 2.0 * a * self.end_time / eps_min
                if not self.L > bound:
                    out.append(
                        f"wrap-around guard violated: L = {self.L:g} must exceed "
                        f"2*a*T/eps_min = {bound:g}"
                    )
        except (ValueError, ConfigError) as exc:
            out.append(f"pressure law rejected: {exc}")
        try:
            if self.epsilon_list and self.eta_list:
                self.recipe(max(self.epsilon_list), min(self.eta_list))
        except RecipeError as exc:
            out.append(f"recipe rejected: {exc}")
        return out

    def check(self):
        bad = self.violations()
        if bad:
            raise ConfigError("; ".join(bad))


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    delta: float
    eta: float
    tau: float
    E_naive_B: float
    E_naive_full: float
    E_corrected: float
    kinetic: float
    pressure_ess: float
    pressure_res: float
    dissipation: float
    mbar_norm: float
    rho_ess_norm: float
    rho_res_norm: float
    wall_seconds: float

    def __post_init__(self):
        for name in ("E_naive_B", "E_naive_full", "E_corrected"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def astuple(self):
        return (
            self.epsilon, self.delta, self.eta, self.tau, self.E_naive_B,
            self.E_naive_full, self.E_corrected, self.kinetic, self.pressure_ess,
            self.pressure_res, self.dissipation, self.mbar_norm,
            self.rho_ess_norm, self.rho_res_norm, self.wall_seconds,
        )


def _format_row(row: ConvergenceRow) -> str:
    return ",".join(f"{v:.17g}" for v in row.astuple())


def write_rows_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    lines.extend(_format_row(r) for r in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def run_single(config: RunConfig, epsilon: float, eta: float,
               indices=(0, 0)) -> list:
    """One sweep member: runs all three solvers and emits per-snapshot rows."""
    t0 = _time.perf_counter()
    law = config.law()
    delta = epsilon**config.delta_beta
    grid3 = config.grid3(epsilon)
    grid2 = config.grid2()
    base = config.recipe(epsilon, eta)

    recipes = [base]
    if config.ensemble_size > 1:
        recipes = []
        for j in range(config.ensemble_size):
            rng = np.random.default_rng([config.seed, indices[0], indices[1], j])
            recipes.append(base.perturbed(rng, config.ensemble_noise))

    params = compressible.SolverParams(
        epsilon=epsilon,
        law=law,
        cfl=config.cfl,
        end_time=config.end_time,
        snapshot_interval=config.snapshot_interval,
    )
    results = [compressible.run(build_initial_3d(r, grid3, law), params) for r in recipes]
    snap_times = results[0].series.times
    energies0 = [compressible.total_energy(r.series.entries[0], law, epsilon) for r in results]

    v_state = limit_initial_2d(base, grid2)
    ac0 = acoustic_initial(base, grid2, law)
    box = Box2D.central(config.L, 0.25)

    rows = []
    for k, tau in enumerate(snap_times):
        v_state = incompressible.advance(v_state, tau)
        ac = acoustic.propagate(ac0, tau)
        members = tuple(r.series.entries[k] for r in results)
        ens = members[0] if len(members) == 1 else EnsembleMeasure(members)

        defect = float(
            np.mean(
                [
                    (e0 - compressible.total_energy(m, law, epsilon)) / delta
                    for e0, m in zip(energies0, members)
                ]
            )
        )
        naive = flat_reference(v_state, grid3, law)
        corr = corrected_reference(v_state, ac, grid3, law)
        rep_b = relative_energy(ens, naive, law, epsilon, delta, restrict_to=box)
        rep_full = relative_energy(ens, naive, law, epsilon, delta)
        rep_corr = relative_energy(ens, corr, law, epsilon, delta, dissipation=defect)
        bounds = uniform_bound_report(ens, law, epsilon, delta)

        rows.append(
            ConvergenceRow(
                epsilon=epsilon,
                delta=delta,
                eta=eta,
                tau=tau,
                E_naive_B=rep_b.value,
                E_naive_full=rep_full.value,
                E_corrected=rep_corr.value,
                kinetic=rep_corr.kinetic_part,
                pressure_ess=rep_corr.ess_pressure,
                pressure_res=rep_corr.res_pressure,
                dissipation=defect,
                mbar_norm=bounds.mbar_norm,
                rho_ess_norm=bounds.rho_ess_norm,
                rho_res_norm=bounds.rho_res_norm,
                wall_seconds=0.0,
            )
        )

    if config.record_timings:
        elapsed = _time.perf_counter() - t0
        rows = [replace(r, wall_seconds=elapsed) for r in rows]
    return rows


def _sweep_worker(payload):
    cfg_dict, i_eps, i_eta = payload
    config = RunConfig.from_dict(cfg_dict)
    epsilon = config.epsilon_list[i_eps]
    eta = config.eta_list[i_eta]
    rows = run_single(config, epsilon, eta, indices=(i_eps, i_eta))
    return [r.astuple() for r in rows]


@dataclass
class SweepResult:
    rows: list
    summary: dict
    csv_path: Path | None = None
    summary_path: Path | None = None


def _report_taus(config: RunConfig):
    T = config.end_time
    snaps = [k * config.snapshot_interval
             for k in range(1, int(round(T / config.snapshot_interval)) + 1)]
    wanted = [T / 4, T / 2, 3 * T / 4, T]
    out = []
    for w in wanted:
        if not snaps:
            break
        tau = min(snaps, key=lambda t: abs(t - w))
        if tau >= T / 8 and tau not in out:
            out.append(tau)
    return out


def _fit_rate(points):
    """Slope of log2(E) against log2(eps) through the two smallest eps.

    points: (eps, value) pairs.  Returns (rate, note)."""
    pts = sorted(points)
    if len(pts) < 2:
        return None, "insufficient points"
    (e1, v1), (e2, v2) = pts[0], pts[1]
    if v1 <= 0.0 or v2 <= 0.0:
        return None, "skipped: zero values"
    rate = (math.log2(v2) - math.log2(v1)) / (math.log2(e2) - math.log2(e1))
    return rate, "fit over two smallest epsilon"


def _summarize(config: RunConfig, rows, gaps, validation):
    taus = _report_taus(config)
    rates = {}
    for eta in config.eta_list:
        per_tau = {}
        for tau in taus:
            pts = [(r.epsilon, r.E_naive_B) for r in rows
                   if r.eta == eta and abs(r.tau - tau) < 1e-9]
            rate, note = _fit_rate(pts)
            per_tau[f"{tau:.12g}"] = {"rate": rate, "note": note}
        rates[f"{eta:.12g}"] = per_tau

    eta_small = min(config.eta_list)
    monotone = {}
    for tau in taus:
        vals = [
            (r.epsilon, r.E_naive_B)
            for r in rows
            if abs(r.eta - eta_small) < 1e-12 and abs(r.tau - tau) < 1e-9
        ]
        vals.sort(reverse=True)  # decreasing epsilon, i.e. sweep order
        seq = [v for _, v in vals]
        monotone[f"{tau:.12g}"] = bool(
            len(seq) >= 2 and all(b < a for a, b in zip(seq, seq[1:]))
        )

    full0 = [
        (r.epsilon, r.E_naive_full)
        for r in rows
        if abs(r.eta - eta_small) < 1e-12 and abs(r.tau) < 1e-12
    ]
    full0.sort(reverse=True)
    seq0 = [v for _, v in full0]
    tau0_not_decreasing = bool(
        len(seq0) >= 2 and all(b >= 0.8 * a for a, b in zip(seq0, seq0[1:]))
    )

    return {
        "config": config.to_dict(),
        "rates_E_naive_B": rates,
        "rate_taus": [f"{t:.12g}" for t in taus],
        "monotone_E_naive_B_smallest_eta": monotone,
        "E_naive_full_tau0_not_decreasing": tau0_not_decreasing,
        "gaps": gaps,
        "rows": len(rows),
        "invariant_suite": validation,
    }


def sweep(config: RunConfig, out_dir=None, with_validation=True) -> SweepResult:
    """Full epsilon x eta sweep; persists rows.csv, summary.json, figures."""
    config.check()
    t0 = _time.perf_counter()
    jobs = [(i_e, i_h) for i_e in range(len(config.epsilon_list))
            for i_h in range(len(config.eta_list))]
    rows = []
    gaps = []
    if config.threads > 1 and len(jobs) > 1:
        cfg_dict = config.to_dict()
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(_sweep_worker, (cfg_dict, i_e, i_h)) for i_e, i_h in jobs]
            for (i_e, i_h), fut in zip(jobs, futures):
                try:
                    rows.extend(ConvergenceRow(*t) for t in fut.result())
                except Exception as exc:  # noqa: BLE001 - partial-failure policy
                    gaps.append({
                        "epsilon": config.epsilon_list[i_e],
                        "eta": config.eta_list[i_h],
                        "error": str(exc),
                    })
    else:
        for i_e, i_h in jobs:
            try:
                rows.extend(
                    run_single(config, config.epsilon_list[i_e], config.eta_list[i_h],
                               indices=(i_e, i_h))
                )
            except Exception as exc:  # noqa: BLE001 - partial-failure policy
                gaps.append({
                    "epsilon": config.epsilon_list[i_e],
                    "eta": config.eta_list[i_h],
                    "error": str(exc),
                })

    validation = validate(config, quick=True).to_dict() if with_validation else None
    summary = _summarize(config, rows, gaps, validation)
    summary["wall_seconds_total"] = _time.perf_counter() - t0

    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_rows_csv(rows, out / "rows.csv")
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if config.figures and rows:
        figures.convergence_figure(rows, out / "convergence.png")
        figures.history_figure(rows, out / "history.png")
    return SweepResult(rows=rows, summary=summary, csv_path=csv_path,
                       summary_path=summary_path)


def acoustic_bench(config: RunConfig, out_dir=None):
    """Dispersive-scaling study of the exact propagator across the sweep.

    Reports value(eps) for the configured (q, p, k) space-time norm, the
    one-sided envelope C * eps^(1/q) calibrated at the largest epsilon, and
    whether the normalized values stay nonincreasing within 20% slack.
    """
    bad = config.violations()
    if bad:
        raise ConfigError("refusing to run the bench: " + "; ".join(bad))
    law = config.law()
    grid2 = config.grid2()
    q = float(config.bench["q"])
    p = float(config.bench["p"])
    k = int(config.bench["k"])
    horizon = float(config.bench["horizon"]) or config.end_time
    eta = min(config.eta_list)

    table = []
    for eps in config.epsilon_list:
        state = acoustic_initial(config.recipe(eps, eta), grid2, law)
        wmax = acoustic.max_frequency(state)
        samples = int(config.bench["samples"])
        if samples <= 0:
            samples = min(4096, max(64, int(np.ceil(horizon * wmax * 4.0 / np.pi)) + 1))
        value = acoustic.dispersive_norms(state, horizon, samples, q, p, k)
        table.append((eps, value))

    eps0, v0 = table[0]
    C = v0 / eps0 ** (1.0 / q) if v0 > 0 else 0.0
    report = []
    prev_norm = None
    all_ok = True
    for eps, value in table:
        normalized = value / eps ** (1.0 / q)
        envelope_ok = value <= 1.2 * C * eps ** (1.0 / q) if C > 0 else value == 0.0
        mono_ok = prev_norm is None or normalized <= 1.2 * prev_norm
        all_ok = all_ok and envelope_ok and mono_ok
        report.append({
            "epsilon": eps,
            "value": value,
            "normalized": normalized,
            "envelope_ok": bool(envelope_ok),
            "monotone_ok": bool(mono_ok),
        })
        prev_norm = normalized

    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["epsilon,value,normalized,envelope_ok,monotone_ok"]
    for r in report:
        lines.append(
            f"{r['epsilon']:.17g},{r['value']:.17g},{r['normalized']:.17g},"
            f"{int(r['envelope_ok'])},{int(r['monotone_ok'])}"
        )
    (out / "acoustic_rows.csv").write_text("\n".join(lines) + "\n")
    if config.figures:
        figures.dispersive_figure(table, out / "dispersive_scaling.png", q)
    return {"q": q, "p": p, "k": k, "horizon": horizon, "C": C,
            "rows": report, "passed": bool(all_ok)}


@dataclass
class ValidationReport:
    checks: list  # (name, passed, detail)

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in self.checks],
        }

    def __str__(self):
        lines = [
            f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}" for name, ok, detail in self.checks
        ]
        lines.append(f"validate: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _law_or_none(config):
    try:
        return config.law()
    except Exception:
        return None


def validate(config: RunConfig, quick=False) -> ValidationReport:
    """Invariant suite on small grids; every check reports pass/fail."""
    checks = []
    rng = np.random.default_rng(config.seed + 12345)

    def add(name, passed, detail):
        checks.append((name, bool(passed), detail))

    # configuration invariants
    bad = config.violations()
    add("config-invariants", not bad, "; ".join(bad) if bad else "all config invariants hold")

    law = _law_or_none(config)
    if law is None:
        add("pressure-hypotheses", False, "pressure law could not be built")
        return ValidationReport(checks)

    # structural pressure hypotheses on a log-spaced sample fan
    samples = np.logspace(-2, 2, 97) * law.rho_tilde
    hyp = check_hypotheses(law, samples)
    add(
        "pressure-hypotheses",
        hyp.passed,
        f"p'_min = {hyp.p_prime_min:.3g}, sup p/P = {hyp.sup_p_over_potential}, "
        f"inf p/rho^g = {hyp.inf_p_over_rho_gamma}"
        + ("" if hyp.passed else f"; failures: {hyp.failures[:3]}"),
    )

    can_run_fluid = hyp.passed and not bad

    # convexity envelopes of the pressure gap around rho_tilde
    if hyp.passed:
        rt = law.rho_tilde
        ess = np.linspace(0.5 * rt, 2.0 * rt, 1000)
        h_ess = relative_potential(law, ess, rt)
        dev = (ess - rt) ** 2
        mask = dev > 0
        c_ess = float((dev[mask] / h_ess[mask]).max()) if mask.any() else 0.0
        add("convexity-essential", np.all(h_ess[mask] > 0) and c_ess < 1e4,
            f"|rho-rt|^2 <= C*H with C = {c_ess:.4g} on [rt/2, 2rt], 1000 samples")

        res = np.concatenate([np.linspace(0.01 * rt, 0.45 * rt, 500),
                              np.linspace(2.5 * rt, 100.0 * rt, 500)])
        h_res = relative_potential(law, res, rt)
        num = 1.0 + np.abs(res - rt) + law.potential(res)
        ok = np.all(h_res > 0)
        c_res = float((num / h_res).max()) if ok else np.inf
        add("convexity-residual", ok and c_res < 1e4,
            f"1+|rho-rt|+P <= C*H with C = {c_res:.4g} outside [rt/2, 2rt], 1000 samples")

    # Helmholtz projection identities
    n2 = 32 if quick else 64
    g2 = Grid2D(n2, n2, 2 * np.pi)
    u = VectorField2D(g2, rng.standard_normal((2, n2, n2)))
    pu = incompressible.helmholtz_project(u)
    ppu = incompressible.helmholtz_project(pu)
    scale = norm(u, 2)
    idem = norm(VectorField2D(g2, ppu.values - pu.values), 2) / scale
    resid = u.values - pu.values
    ortho = abs(float(np.sum(pu.values * resid) * g2.cell_area)) / scale**2
    add("helmholtz-idempotent", idem <= 1e-12, f"||P P u - P u|| / ||u|| = {idem:.2e}")
    add("helmholtz-orthogonal", ortho <= 1e-12, f"<P u, u - P u> / ||u||^2 = {ortho:.2e}")

    # acoustic energy conservation under exact propagation
    if hyp.passed and getattr(law, "sound_speed_sq", 0) > 0:
        k1 = rng.integers(-4, 5, size=8)
        k2 = rng.integers(-4, 5, size=8)
        amps = rng.standard_normal(8) * 0.1
        prof = HarmonicProfile(tuple((int(a), int(b), float(c), 0.0)
                                     for a, b, c in zip(k1, k2, amps)))
        s = ScalarField2D(g2, prof.sample(g2))
        psi = ScalarField2D(g2, prof.sample(g2)[::-1, :].copy())
        st = acoustic.acoustic_state(s, psi, 0.5, law)
        e0 = acoustic.acoustic_energy(st)
        e1 = acoustic.acoustic_energy(acoustic.propagate(st, 17.3))
        rel = abs(e1 - e0) / max(e0, 1e-300)
        add("acoustic-energy", rel <= 1e-12, f"relative drift over t = 17.3: {rel:.2e}")

    # compressible conservation on a small layer
    if can_run_fluid:
        n3 = 16 if quick else 32
        grid3 = Grid3D(n3, n3, 4, config.L, 0.25)
        recipe = DataRecipe(
            kind="ill-prepared",
            v0_stream=HarmonicProfile(((1, 0, 0.3, 0.0), (0, 1, 0.2, 1.0))),
            s0=HarmonicProfile(((1, 1, 0.3, 0.0),)),
            psi0=HarmonicProfile(((0, 1, 0.2, 0.5),)),
            epsilon=0.5,
            eta=0.25,
        )
        state = build_initial_3d(recipe, grid3, law)
        params = compressible.SolverParams(epsilon=0.5, law=law, cfl=config.cfl
                                           if 0 < config.cfl < 1 else 0.45)
        mass0 = float(state.rho.values.sum() * grid3.cell_volume)
        energies = [compressible.total_energy(state, law, 0.5)]
        nsteps = 50 if quick else 100
        try:
            for _ in range(nsteps):
                dt = compressible.stable_dt(state, params)
                state = compressible.step(state, params, dt)
                energies.append(compressible.total_energy(state, law, 0.5))
            mass1 = float(state.rho.values.sum() * grid3.cell_volume)
            drift = abs(mass1 - mass0) / abs(mass0)
            add("mass-conservation", drift <= 1e-13,
                f"relative drift after {nsteps} steps: {drift:.2e}")
            e = np.array(energies)
            worst = float((e[1:] - e[:-1]).max() / max(e[0], 1e-300))
            add("energy-monotone", worst <= 1e-12,
                f"max per-step relative energy increase: {worst:.2e}")
        except compressible.VacuumStateError as exc:
            add("mass-conservation", False, f"run aborted: {exc}")

    # Jensen inequalities on random ensembles
    n_ens = 20 if quick else 100
    worst_vert = 0.0
    worst_ens = 0.0
    gsmall = Grid3D(6, 5, 4, 1.0, 0.5)
    for _ in range(n_ens):
        members = []
        for _ in range(8):
            rho = 1.0 + 0.4 * rng.random(gsmall.shape)
            mom = rng.standard_normal((3,) + gsmall.shape)
            members.append(
                compressible.FluidState3D(
                    ScalarField3D(gsmall, rho), VectorField3D(gsmall, mom), 0.0
                )
            )
        f = members[0].rho.values
        vert = np.abs(f.mean(axis=2)) ** 2 - (np.abs(f) ** 2).mean(axis=2)
        worst_vert = max(worst_vert, float(vert.max()))
        mags = np.stack([np.sqrt((m.mom.values**2).sum(axis=0)) for m in members])
        ens = mags.mean(axis=0) ** 2 - (mags**2).mean(axis=0)
        worst_ens = max(worst_ens, float(ens.max()))
    add("jensen-vertical", worst_vert <= 1e-12,
        f"max violation of |avg f|^2 <= avg |f|^2: {worst_vert:.2e}")
    add("jensen-ensemble", worst_ens <= 1e-12,
        f"max violation of <|m|>^2 <= <|m|^2>: {worst_ens:.2e}")

    return ValidationReport(checks)
