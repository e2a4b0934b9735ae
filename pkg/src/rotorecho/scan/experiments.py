"""Batch experiment drivers behind the CLI subcommands.

Every experiment is a pure function of its ScanConfig: with the seed fixed,
re-running writes byte-identical CSVs.  Scan points are independent and can
be dispatched to a process pool; results are merged in config order no
matter when they complete.
"""
from __future__ import annotations

import concurrent.futures
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..bipartite import (assemble_bipartite_rho_t, equilibrium_decomposition,
                         negativity, sudden_death_threshold, two_qubit_bell_like)
from ..echo import (allegiance_series, batch_standard_error, echo_stats,
                    overlap_data, pair_family, spectral_decompose)
from ..reduced import (build_trajectory, cat_state_spec, equilibration_report)
from ..rmt import cue_moment_oracle, predict_constants, predicted_mean_std
from ..rotor import (Coupling, Lattice, RotorParams, Torus, build_floquet,
                     dense_unitary)
from ..states import DensityMatrix, StateVector
from .config import ConfigError, ScanConfig
from .csvio import read_csv, write_csv
from .fitting import loglog_fit

SPECTRAL_NEFF_CAP = 512
K_DITHER_STEP = 0.012          # relative kick-strength step between realizations
SHIFT_DITHER_STEP = 0.65
LATTICE_MARGIN = 20.0          # lattice size in units of the expected localization length
RELAX_WINDOW_FACTOR = 2.4      # window start in units of the expected localization length
MIXED_OMEGA_DIM_CAP = 4096

SERIES_HEADER = ["time_kicks", "f_re", "f_im", "F"]
SCAN_HEADER = ["param_value", "mean_F", "std_F", "N_eff", "predicted_mean",
               "predicted_std"]
EQUILIBRATE_HEADER = ["time_kicks", "trace_dist", "hs_dist", "purity", "bound_rhs"]
FIT_HEADER = ["slope", "slope_stderr", "intercept", "r_squared", "n_points"]


class PhysicsRunError(RuntimeError):
    """Wrapper for physics-layer failures inside an experiment."""


@dataclass
class RunResult:
    out_dir: Path
    files: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def next_pow2(x: float) -> int:
    return 1 << max(6, int(math.ceil(math.log2(max(2.0, x)))))


def expected_localization(k: float, hbar: float) -> float:
    """Rough localization length (levels) used only to size lattices and
    relaxation windows; the measured value is reported alongside."""
    return 1.1 * k * k / hbar**2


def geometry_for(config: ScanConfig, hbar: float):
    if config.geometry == "torus":
        return Torus(round(2 * math.pi / hbar))
    if config.lattice_m:
        return Lattice.centered(config.lattice_m)
    m = next_pow2(LATTICE_MARGIN * expected_localization(config.K, hbar))
    return Lattice.centered(m)


def window_start_for(config: ScanConfig, hbar: float) -> int:
    if config.geometry == "torus":
        return config.window_start
    relax = RELAX_WINDOW_FACTOR * expected_localization(config.K, hbar)
    return max(config.window_start, int(math.ceil(relax)))


def build_omega0(config: ScanConfig, geometry):
    dim = geometry.dim
    kind, _, arg = config.omega0.partition(":")
    if kind == "momentum_zero":
        return StateVector.basis_state(dim, -geometry.p_min)
    if kind == "random_pure":
        rng = np.random.default_rng(int(arg) + config.seed)
        vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return StateVector.normalized(vec)
    if kind == "maximally_mixed":
        d = int(arg)
        if d > dim:
            raise PhysicsRunError(f"maximally_mixed:{d} exceeds the space ({dim})")
        if dim > MIXED_OMEGA_DIM_CAP:
            raise PhysicsRunError(
                f"mixed initial states need dim <= {MIXED_OMEGA_DIM_CAP}, got {dim}")
        idx = -geometry.p_min + np.arange(d) - d // 2
        m = np.zeros((dim, dim), dtype=complex)
        m[idx, idx] = 1.0 / d
        return DensityMatrix(m)
    raise ConfigError(f"unsupported omega0 {config.omega0!r}")


def realization_params(config: ScanConfig) -> list:
    """(K, shift) per realization: kick-strength dither crossed with coupling
    offsets.  The same list is used at every scan point, so the dither
    pattern cancels out of any cross-point power-law fit."""
    out = []
    for r in range(config.realizations):
        k = config.K * (1.0 + K_DITHER_STEP * (r % 4))
        shift = config.shift + SHIFT_DITHER_STEP * (r // 4)
        out.append((k, shift))
    return out


def _geometric_mean(values) -> float:
    return float(10 ** np.mean(np.log10(np.asarray(values, dtype=float))))


# ---------------------------------------------------------------------------
# hbar-scan / coupling-scan points
# ---------------------------------------------------------------------------

def spectral_predictions(config: ScanConfig, hbar: float, shift: float,
                         epsilon: float, kick: float | None = None):
    """Exact N_eff plus (C, G) via Floquet diagonalization; only feasible for
    modest dimensions."""
    geometry = geometry_for(config, hbar)
    params = RotorParams(k=kick if kick is not None else config.K, hbar_eff=hbar,
                         coupling=Coupling(config.coupling), shift=shift,
                         geometry=geometry)
    omega0 = build_omega0(config, geometry)
    dec_u = spectral_decompose(dense_unitary(build_floquet(params)))
    dec_p = spectral_decompose(dense_unitary(build_floquet(params.perturbed(epsilon))))
    data = overlap_data(dec_u, dec_p, omega0)
    omega_dm = omega0 if isinstance(omega0, DensityMatrix) else DensityMatrix.pure(omega0)
    inputs = predict_constants(omega_dm, dec_u.eigenvectors, n_eff=data.n_eff)
    mean, std = predicted_mean_std(inputs)
    return data, inputs, mean, std


def echo_point(config: ScanConfig, hbar: float, shift: float, epsilon: float) -> dict:
    """One scan point: realization-averaged long-time echo statistics."""
    geometry = geometry_for(config, hbar)
    omega0 = build_omega0(config, geometry)
    w0 = window_start_for(config, hbar)
    t_max = w0 + config.window_len
    reals = [(k, s + shift - config.shift) for k, s in realization_params(config)]
    ops = []
    for k, s in reals:
        base = RotorParams(k=k, hbar_eff=hbar, coupling=Coupling(config.coupling),
                           shift=s, geometry=geometry)
        ops.append(build_floquet(base.perturbed(epsilon)))
        ops.append(build_floquet(base))
    pairs = [(2 * r, 2 * r + 1) for r in range(len(reals))]
    track = [2 * r + 1 for r in range(len(reals))] if config.geometry == "lattice" else []
    fam = pair_family(ops, omega0, t_max, pairs, track_occupation=track,
                      occupation_start=w0)
    means, stds, prs = [], [], []
    for r, pair in enumerate(pairs):
        stats = echo_stats(fam.series[pair], w0)
        means.append(stats.mean_f)
        stds.append(stats.std_f)
        if track:
            prs.append(fam.occupation_pr[2 * r + 1])
    point = {
        "hbar": hbar, "window_start": w0, "window_len": config.window_len,
        "lattice_m": geometry.dim if config.geometry == "lattice" else 0,
        "mean_F": _geometric_mean(means), "std_F": _geometric_mean(stds),
        "realization_means": means, "realization_stds": stds,
    }
    if track:
        point["j_loc"] = _geometric_mean(prs)
        point["realization_j"] = prs
    # standard error of the window mean (realization 0), for oracle comparisons
    point["mean_se"] = batch_standard_error(
        fam.series[pairs[0]].F[fam.series[pairs[0]].times >= w0])
    return point


def _neff_and_predictions(config: ScanConfig, hbar: float, shift: float,
                          epsilon: float, point: dict):
    """Attach N_eff and the closed-form predictions to a scan point."""
    pure = config.omega0 == "momentum_zero" or config.omega0.startswith("random_pure")
    if config.geometry == "torus":
        n = round(2 * math.pi / hbar)
        if n <= SPECTRAL_NEFF_CAP:
            data, inputs, mean, std = spectral_predictions(config, hbar, shift, epsilon)
            point.update(n_eff=data.n_eff, predicted_mean=mean, predicted_std=std,
                         n_eff_method="spectral",
                         c_const=inputs.c_const, g_const=inputs.g_const)
        else:
            # chaotic spreading covers the whole torus; Porter-Thomas value of
            # the participation ratio for a pure initial state
            point.update(n_eff=n, n_eff_method="full-torus")
            if pure:
                c = 1.0 + 2.0 / n
                point.update(predicted_mean=c / n, predicted_std=c / n)
            else:
                point.update(predicted_mean=float("nan"), predicted_std=float("nan"))
    else:
        j_loc = point.get("j_loc")
        if j_loc:
            point.update(n_eff=int(round(j_loc)), n_eff_method="occupation-pr")
            if pure:
                c = 1.0 + 2.0 / j_loc
                point.update(predicted_mean=c / j_loc, predicted_std=c / j_loc)
            else:
                point.update(predicted_mean=float("nan"), predicted_std=float("nan"))
        else:
            point.update(n_eff=0, n_eff_method="none",
                         predicted_mean=float("nan"), predicted_std=float("nan"))
    return point


def _hbar_point_task(args) -> dict:
    config, hbar = args
    point = echo_point(config, hbar, config.shift, config.epsilon_nm)
    return _neff_and_predictions(config, hbar, config.shift, config.epsilon_nm, point)


def _coupling_point_task(args) -> dict:
    config, g_bar = args
    hbar = config.hbar_list[0]
    # s_m = 1, s_n - s_m = 1: unperturbed term g_bar, perturbation g_bar
    point = echo_point(config, hbar, g_bar, g_bar)
    point["g_bar"] = g_bar
    return _neff_and_predictions(config, hbar, g_bar, g_bar, point)


def _parallel_map(task, payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [task(p) for p in payloads]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, payloads))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_echo_series(config: ScanConfig, out: Path) -> RunResult:
    result = RunResult(out_dir=out)
    curves = []
    for i, hbar in enumerate(config.hbar_list):
        geometry = geometry_for(config, hbar)
        omega0 = build_omega0(config, geometry)
        w0 = window_start_for(config, hbar)
        t_max = w0 + config.window_len
        base = RotorParams(k=config.K, hbar_eff=hbar,
                           coupling=Coupling(config.coupling),
                           shift=config.shift, geometry=geometry)
        u_unpert = build_floquet(base)
        u_pert = build_floquet(base.perturbed(config.epsilon_nm))
        series = allegiance_series(u_unpert, u_pert, omega0, t_max)
        stats = echo_stats(series, w0)
        path = write_csv(out / f"series_h{i:02d}.csv", SERIES_HEADER,
                         ((int(t), float(series.f[t].real), float(series.f[t].imag),
                           float(series.F[t])) for t in series.times))
        result.files.append(path)
        curves.append({"hbar": hbar, "csv": path.name, "mean_F": stats.mean_f,
                       "std_F": stats.std_f, "window_start": w0,
                       "dim": geometry.dim})
    result.manifest["curves"] = curves
    from .plots import plot_series
    result.files.append(plot_series(out / "echo_series.svg", config, curves))
    return result


def run_hbar_scan(config: ScanConfig, out: Path) -> RunResult:
    result = RunResult(out_dir=out)
    hbars = sorted(config.hbar_list, reverse=True)
    points = _parallel_map(_hbar_point_task, [(config, h) for h in hbars],
                           config.workers)
    rows = [(p["hbar"], p["mean_F"], p["std_F"], p["n_eff"],
             p["predicted_mean"], p["predicted_std"]) for p in points]
    scan_path = write_csv(out / "hbar_scan.csv", SCAN_HEADER, rows)
    result.files.append(scan_path)
    _, parsed = read_csv(scan_path)
    x = np.array([r[0] for r in parsed])
    fit_mean = loglog_fit(x, np.array([r[1] for r in parsed]))
    fit_std = loglog_fit(x, np.array([r[2] for r in parsed]))
    for name, fit in (("fit_mean", fit_mean), ("fit_std", fit_std)):
        result.files.append(write_csv(out / f"{name}.csv", FIT_HEADER,
                                      [(fit.slope, fit.slope_stderr, fit.intercept,
                                        fit.r_squared, fit.n_points)]))
    result.manifest.update(points=points,
                           fit_mean=fit_mean.as_row(), fit_std=fit_std.as_row())
    from .plots import plot_scan
    result.files.append(plot_scan(out / "hbar_scan.svg", "hbar_eff", rows,
                                  fit_mean, fit_std))
    return result


def run_coupling_scan(config: ScanConfig, out: Path) -> RunResult:
    result = RunResult(out_dir=out)
    gs = sorted(config.g_list)
    points = _parallel_map(_coupling_point_task, [(config, g) for g in gs],
                           config.workers)
    rows = [(p["g_bar"], p["mean_F"], p["std_F"], p["n_eff"],
             p["predicted_mean"], p["predicted_std"]) for p in points]
    scan_path = write_csv(out / "coupling_scan.csv", SCAN_HEADER, rows)
    result.files.append(scan_path)

    # Region bookkeeping: region III = strong couplings whose mean no longer
    # moves by more than the saturated fluctuation width across the last
    # decade of the scan.
    mean_hi = points[-1]["mean_F"]
    std_hi = points[-1]["std_F"]
    regions = []
    for p in points:
        if abs(p["mean_F"] - mean_hi) < std_hi:
            regions.append("III")
        elif p["mean_F"] > 0.5:
            regions.append("I")
        else:
            regions.append("II")
    g_iii = next((g for g, r in zip(gs, regions) if r == "III"), None)
    last_decade = [p for g, p in zip(gs, points) if g >= gs[-1] / 10.0]
    spread = max(q["mean_F"] for q in last_decade) - min(q["mean_F"] for q in last_decade)
    result.manifest.update(points=points, regions=regions,
                           region_iii_start_g=g_iii,
                           last_decade_mean_spread=spread,
                           last_decade_saturated=bool(spread < std_hi))
    from .plots import plot_scan
    result.files.append(plot_scan(out / "coupling_scan.svg", "g_bar", rows))
    return result


def _equilibrate_point_task(args) -> dict:
    config, hbar, want_series = args
    geometry = geometry_for(config, hbar)
    omega0 = build_omega0(config, geometry)
    w0 = window_start_for(config, hbar)
    t_max = w0 + config.window_len
    spec = cat_state_spec(math.sqrt(config.alpha_sq), omega_c=config.omega_c)
    needed = sorted({i for pair in spec.coherence_pairs() for i in pair})
    if not needed:
        raise PhysicsRunError("central state has no coherences to dephase")
    pair_keys = spec.coherence_pairs()

    # all realizations ride in one batched family: operator columns are
    # grouped per realization, echo pairs never cross groups
    reals = realization_params(config)
    width = len(needed)
    ops = []
    fam_pairs = []
    for r, (k_r, s0) in enumerate(reals):
        base = RotorParams(k=k_r, hbar_eff=hbar, coupling=Coupling(config.coupling),
                           shift=0.0, geometry=geometry)
        col_of = {n: r * width + i for i, n in enumerate(needed)}
        ops.extend(build_floquet(base.perturbed(s0 + config.g_bar * spec.couplings[n]))
                   for n in needed)
        fam_pairs.extend((col_of[n], col_of[m]) for n, m in pair_keys)
    fam = pair_family(ops, omega0, t_max, fam_pairs)

    mean_dhs_by_real = []
    series_csv_rows = None
    report_summary = None
    for r in range(len(reals)):
        echoes = {(n, m): fam.series[(r * width + needed.index(n),
                                      r * width + needed.index(m))]
                  for n, m in pair_keys}
        # window-averaged D_HS via the exact expansion over the echo functions
        acc = np.zeros(t_max + 1)
        for (n, m), series in echoes.items():
            acc += 2.0 * abs(spec.a[n, m]) ** 2 * series.F
        dhs = np.sqrt(acc)
        mean_dhs_by_real.append(float(dhs[w0:].mean()))
        if want_series and series_csv_rows is None:
            times = np.arange(t_max + 1)
            traj = build_trajectory(spec, echoes, times)
            report = equilibration_report(traj, spec, echoes=echoes, window_start=w0)
            series_csv_rows = [
                (int(t), float(report.trace_dist[i]), float(report.hs_dist[i]),
                 float(report.purities[i]), float(report.bound_rhs[i]))
                for i, t in enumerate(times)]
            report_summary = {
                "mean_trace_dist": report.mean_trace_dist,
                "mean_hs_dist": report.mean_hs_dist,
                "bound_margin": report.bound_margin,
                "purity_floor_margin": report.purity_floor_margin,
                "expansion_residual": report.expansion_residual,
            }
    return {"hbar": hbar, "window_start": w0, "n_c": spec.n_c,
            "dim": geometry.dim,
            "mean_hs_dist": _geometric_mean(mean_dhs_by_real),
            "realization_means": mean_dhs_by_real,
            "series_rows": series_csv_rows, "report": report_summary}


def run_equilibrate(config: ScanConfig, out: Path) -> RunResult:
    result = RunResult(out_dir=out)
    hbars = sorted(config.hbar_list, reverse=True)
    points = _parallel_map(_equilibrate_point_task,
                           [(config, h, True) for h in hbars], config.workers)
    summaries = []
    for i, p in enumerate(points):
        path = write_csv(out / f"equilibrate_h{i:02d}.csv", EQUILIBRATE_HEADER,
                         p.pop("series_rows"))
        result.files.append(path)
        p["csv"] = path.name
        summaries.append(p)
    rows = [(p["hbar"], p["mean_hs_dist"]) for p in summaries]
    scan_path = write_csv(out / "dhs_scan.csv", ["param_value", "mean_hs_dist"], rows)
    result.files.append(scan_path)
    _, parsed = read_csv(scan_path)
    fit = loglog_fit([r[0] for r in parsed], [r[1] for r in parsed])
    result.files.append(write_csv(out / "fit_dhs.csv", FIT_HEADER,
                                  [(fit.slope, fit.slope_stderr, fit.intercept,
                                    fit.r_squared, fit.n_points)]))
    result.manifest.update(points=summaries, fit_dhs=fit.as_row())
    from .plots import plot_equilibrate
    result.files.append(plot_equilibrate(out / "equilibrate.svg", rows, fit,
                                         summaries, out))
    return result


def run_bipartite(config: ScanConfig, out: Path) -> RunResult:
    result = RunResult(out_dir=out)
    hbar = config.hbar_list[0]
    geometry = geometry_for(config, hbar)
    omega0 = build_omega0(config, geometry)
    w0 = window_start_for(config, hbar)
    t_max = w0 + config.window_len
    spec2q = two_qubit_bell_like(omega_c=config.omega_c)
    base = RotorParams(k=config.K, hbar_eff=hbar, coupling=Coupling(config.coupling),
                       shift=config.shift, geometry=geometry)
    # qubit couplings (0, 1): epsilon_nm is the full perturbation g_bar*(s_1-s_0)
    ops = [build_floquet(base), build_floquet(base.perturbed(config.epsilon_nm))]
    fam = pair_family(ops, omega0, t_max, [(0, 1)])
    f01 = fam.series[(0, 1)]
    echo_map = {(0, 1): f01}

    rows = []
    negs = np.empty(t_max + 1)
    flips = []
    prev = None
    for t in range(t_max + 1):
        rho = assemble_bipartite_rho_t(spec2q, echo_map, echo_map, t)
        res = negativity(rho, spec2q.dims)
        negs[t] = res.negativity
        rows.append((t, float(f01.F[t]), res.negativity, int(res.entangled)))
        if prev is not None and res.entangled != prev:
            flips.append(t)
        prev = res.entangled
    path = write_csv(out / "bipartite_series.csv",
                     ["time_kicks", "F01", "negativity", "entangled"], rows)
    result.files.append(path)

    stats = echo_stats(f01, w0)
    root = sudden_death_threshold()
    analytic = 3.0 - 2.0 * math.sqrt(2.0)
    _, _, corr_norm = equilibrium_decomposition(spec2q, {(0, 1): stats.mean_f})
    result.manifest.update(
        hbar=hbar, mean_F01=stats.mean_f, std_F01=stats.std_f,
        entangled_flips=flips,
        first_disentangled_kick=flips[0] if flips else None,
    )
    result.manifest.update(
        sudden_death={
            "bisection_root_F": root,
            "analytic_root_F": analytic,
            "root_abs_error": abs(root - analytic),
            "printed_value_sqrt_sqrt2_minus_1": math.sqrt(math.sqrt(2.0) - 1.0),
            "discrepancy_note": (
                "the published critical value sqrt(-1+sqrt(2)) ~= 0.6436 is not a "
                "root of beta(F) = 1 - F - 2*sqrt(F); the bisection of the "
                "negativity itself gives F* = 3 - 2*sqrt(2) ~= 0.1716, which is "
                "reported here; the disagreement is flagged, not resolved"),
        },
        equilibrium_correction_trace_norm=corr_norm,
        mean_F_below_threshold=bool(stats.mean_f < root),
    )
    from .plots import plot_bipartite
    result.files.append(plot_bipartite(out / "bipartite.svg", rows, root))
    return result


def run_rmt_check(config: ScanConfig, out: Path) -> RunResult:
    result = RunResult(out_dir=out)
    report = cue_moment_oracle(config.cue_n, config.cue_samples, config.seed)
    rows = [
        ("abs_sq", report.mean_sq, report.expected_sq, report.se_sq,
         report.sq_deviation_sigmas),
        ("abs_quart", report.mean_quart, report.expected_quart, report.se_quart,
         report.quart_deviation_sigmas),
    ]
    path = write_csv(out / "cue_moments.csv",
                     ["moment", "measured", "expected", "stderr", "deviation_sigmas"],
                     rows)
    result.files.append(path)
    result.manifest.update(n=report.n, samples=report.samples,
                           mean_sq=report.mean_sq, se_sq=report.se_sq,
                           mean_quart=report.mean_quart, se_quart=report.se_quart,
                           sq_sigmas=report.sq_deviation_sigmas,
                           quart_sigmas=report.quart_deviation_sigmas)
    from .plots import plot_rmt
    result.files.append(plot_rmt(out / "cue_moments.svg", rows))
    return result


RUNNERS = {
    "echo-series": run_echo_series,
    "hbar-scan": run_hbar_scan,
    "coupling-scan": run_coupling_scan,
    "equilibrate": run_equilibrate,
    "bipartite": run_bipartite,
    "rmt-check": run_rmt_check,
}


def run(config: ScanConfig) -> RunResult:
    config = config.validated()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = RUNNERS[config.experiment](config, out)
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "experiment": config.experiment,
        "seed": config.seed,
        **result.manifest,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                        default=float) + "\n", encoding="utf-8")
    result.files.append(manifest_path)
    result.manifest = manifest
    return result
