"""Command-line front end: figure-style data runs, validation suites,
and reproducible CSV/JSON output.

Every command consumes a flat key=value configuration (builtin preset,
config file, and/or --key value overrides), writes one CSV of data rows plus
a JSON sidecar holding the exact configuration, and exits 0 on success,
1 on bad arguments or config, 2 when an estimator reports an unresolvable
energy, 3 when a sampler flags non-convergence, and 4 when a validation
command finds violations.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib.metadata import version as _pkg_version

import numpy as np

from . import dense, device, estimators, filters, ising, qamc

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNRESOLVABLE = 2
EXIT_NONCONVERGED = 3
EXIT_VIOLATIONS = 4

THETA_NAMES = {"pi/4": math.pi / 4, "pi/3": math.pi / 3, "pi/6": math.pi / 6}

PRESETS: dict[str, dict] = {
    # broadened local density of states, 50 random basis states, N=100
    "fig1": {
        "command": "ldos", "n": 100, "g": 1.0, "h": 2.0, "delta": 0.1,
        "x": 3.0, "n_states": 50, "seed": 20240, "r_values": "0.4,1",
    },
    # filtered energy observable for the same model, two widths
    "fig2": {
        "command": "filtered", "n": 100, "g": 1.0, "h": 2.0,
        "delta_a": 0.1, "delta_b": 1.0, "opt_r": 1.0, "x": 3.0,
        "n_states": 50, "seed": 20240,
    },
    # microcanonical sampling vs the closed-form curve, N=20
    "fig3a": {
        "command": "qamc-micro", "n": 20, "g": 1.0, "h": 2.0,
        "deltas": "1,4", "x": 3.0, "samples": 100000, "burn_in": 1000,
        "cutoffs": "0", "e_min": -24.0, "e_max": 16.0, "e_step": 4.0,
        "seed": 31, "shots": 0,
    },
    "fig3b": {
        "command": "qamc-micro", "n": 20, "g": 2.0, "h": 1.0,
        "deltas": "1,4", "x": 3.0, "samples": 100000, "burn_in": 1000,
        "cutoffs": "0", "e_min": -24.0, "e_max": 16.0, "e_step": 4.0,
        "seed": 32, "shots": 0,
    },
    # same sampler at N=100, with and without the weight cutoff
    "fig4a": {
        "command": "qamc-micro", "n": 100, "g": 1.0, "h": 2.0,
        "deltas": "1,4", "x": 3.0, "samples": 100000, "burn_in": 1000,
        "cutoffs": "0,0.01", "e_min": -100.0, "e_max": 100.0, "e_step": 20.0,
        "seed": 41, "shots": 0,
    },
    "fig4b": {
        "command": "qamc-micro", "n": 100, "g": 2.0, "h": 1.0,
        "deltas": "1,4", "x": 3.0, "samples": 100000, "burn_in": 1000,
        "cutoffs": "0,0.01", "e_min": -100.0, "e_max": 100.0, "e_step": 20.0,
        "seed": 42, "shots": 0,
    },
    # canonical sampling vs closed form for two couplings, N=100
    "fig5": {
        "command": "qamc-canonical", "n": 100, "pairs": "0.3:0.8,0.4:0.4",
        "delta": 1.0, "x": 3.0, "samples": 100000, "burn_in": 1000,
        "cutoffs": "0,0.01", "grid_min": -100.0, "grid_max": 100.0,
        "grid_step": 0.5, "betas": "0,0.25,0.5,0.75,1.0,1.25,1.5",
        "seed": 51, "shots": 0,
    },
    # tilted-field convergence study (doubly filtered vs eigenwindow);
    # the three width families coincide at the smallest size
    "appD": {
        "command": "double-filtered", "j": 1.0, "h": 0.5, "g": -1.05,
        "sizes": "10,12,14", "thetas": "pi/4,pi/3,pi/6",
        "delta_const": 3.0, "delta_quad": 300.0, "window_frac": 0.05,
        "seed": 60,
    },
}


def parse_scalar(text: str):
    """int -> float -> bool -> str, in that order."""
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    return text


def format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def read_config_file(path: str) -> dict:
    config = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            config[key.strip()] = parse_scalar(value.strip())
    return config


def write_config_file(path: str, config: dict):
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(config):
            fh.write(f"{key} = {format_scalar(config[key])}\n")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if value is None:
        return ""
    text = str(value)
    if any(c in text for c in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path: str, header: list[str], rows: list[list]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")


def _floats(text) -> list[float]:
    return [float(tok) for tok in str(text).split(",") if tok != ""]


def _model_states(config, rng):
    model = ising.IsingModel(g=float(config["g"]), h=float(config["h"]),
                             n_sites=int(config["n"]))
    states = [ising.random_fock_state(model, rng)
              for _ in range(int(config.get("n_states", 50)))]
    return model, states


def _noisy(source, config):
    shots = int(config.get("shots", 0) or 0)
    if shots > 0:
        spec = device.NoiseSpec(shots=shots,
                                seed=int(config.get("noise_seed",
                                                    config.get("seed", 0))))
        return device.wrap_noisy(source, spec)
    return source


# ---------------------------------------------------------------------------
# commands: each returns (header, rows, exit_code)


def cmd_ldos(config):
    rng = np.random.Generator(np.random.PCG64(int(config.get("seed", 0))))
    model, states = _model_states(config, rng)
    delta, x = float(config["delta"]), float(config.get("x", 3.0))
    source = _noisy(device.FreeFermionSource(model), config)
    r_values = _floats(config.get("r_values", "1"))
    full = filters.build_expansion(filters.FilterSpec(delta=delta,
                                                      n_sites=model.n_sites, x=x))
    opts = [filters.build_expansion(
        filters.FilterSpec(delta=delta, n_sites=model.n_sites, x=x,
                           grid=filters.GRID_OPTIMIZED, r=r)) for r in r_values]
    header = ["state_index", "energy", "sigma", "d_full"]
    header += [f"d_opt_r{format_scalar(r)}" for r in r_values]
    rows = []
    for i, st in enumerate(states):
        e_k = ising.state_energy(model, st)
        sigma = math.sqrt(ising.state_energy_variance(model, st))
        row = [i, e_k, sigma, estimators.ldos(source, st, e_k, full).value]
        row += [estimators.ldos(source, st, e_k, opt).value for opt in opts]
        rows.append(row)
    return header, rows, EXIT_OK


def cmd_filtered(config):
    rng = np.random.Generator(np.random.PCG64(int(config.get("seed", 0))))
    model, states = _model_states(config, rng)
    x = float(config.get("x", 3.0))
    source = _noisy(device.FreeFermionSource(model), config)
    obs_name = str(config.get("observable", "energy-density"))
    if obs_name == "magnetization":
        obs = ising.magnetization_blocks(model)
    elif obs_name == "energy-density":
        obs = ising.hamiltonian_blocks(model, scale=model.n_sites)
    else:
        raise ValueError(f"unknown observable {obs_name!r}")
    delta_a = float(config.get("delta_a", 0.1))
    delta_b = float(config.get("delta_b", 1.0))
    opt_r = float(config.get("opt_r", 1.0))
    exp_a = filters.build_expansion(filters.FilterSpec(delta=delta_a,
                                                       n_sites=model.n_sites, x=x))
    exp_b = filters.build_expansion(filters.FilterSpec(delta=delta_b,
                                                       n_sites=model.n_sites, x=x))
    exp_o = filters.build_expansion(
        filters.FilterSpec(delta=delta_b, n_sites=model.n_sites, x=x,
                           grid=filters.GRID_OPTIMIZED, r=opt_r))
    header = ["state_index", "energy", "value_full_narrow", "value_full_wide",
              "value_opt_wide"]
    rows = []
    code = EXIT_OK
    for i, st in enumerate(states):
        e_k = ising.state_energy(model, st)
        try:
            row = [i, e_k,
                   estimators.filtered_observable(source, st, obs, e_k, exp_a).value,
                   estimators.filtered_observable(source, st, obs, e_k, exp_b).value,
                   estimators.filtered_observable(source, st, obs, e_k, exp_o).value]
        except estimators.UnresolvableEnergyError:
            row = [i, e_k, None, None, None]
            code = EXIT_UNRESOLVABLE
        rows.append(row)
    return header, rows, code


def cmd_double_filtered(config):
    j = float(config.get("j", 1.0))
    h, g = float(config["h"]), float(config["g"])
    sizes = [int(v) for v in _floats(config["sizes"])]
    theta_keys = str(config["thetas"]).split(",")
    window_frac = float(config.get("window_frac", 0.04))
    delta_const = float(config.get("delta_const", 1.6))
    delta_quad = float(config.get("delta_quad", 160.0))
    header = ["n", "theta", "observable", "delta_family", "delta",
              "value", "reference", "deviation"]
    rows = []
    for n in sizes:
        solver = dense.TiltedIsingSectors(j, h, g, n)
        zz = dense.zz_bond_diagonal(n, n // 2 - 1)
        x_sym = 0.5 * (dense.x_site_sparse(n, n // 2 - 1)
                       + dense.x_site_sparse(n, n // 2))
        for theta_key in theta_keys:
            theta = THETA_NAMES[theta_key.strip()]
            state = dense.product_state_theta(theta, n)
            energy = solver.moments(state)[0]
            for obs_name, obs in (("zz_center", zz), ("x_center", x_sym)):
                reference = solver.eigenwindow_average(obs, energy,
                                                       window_frac * n)
                for family, delta in (("const", delta_const),
                                      ("inv_n", delta_quad / n / 10.0),
                                      ("inv_n2", delta_quad / n ** 2)):
                    value = solver.filtered_double_expectation(
                        state, obs, energy, delta)
                    rows.append([n, theta_key.strip(), obs_name, family, delta,
                                 value, reference, abs(value - reference)])
    return header, rows, EXIT_OK


def cmd_find_energy(config):
    rng = np.random.Generator(np.random.PCG64(int(config.get("seed", 0))))
    model, states = _model_states(config, rng)
    delta = float(config["delta"])
    source = _noisy(device.FreeFermionSource(model), config)
    header = ["state_index", "e_mean", "sigma", "r", "slices", "chosen_e",
              "q_at_e", "threshold", "succeeded"]
    rows = []
    for i, st in enumerate(states):
        rep = estimators.find_valid_energy(source, st, delta,
                                           x=float(config.get("x", 3.0)))
        rows.append([i, rep.e_mean, rep.sigma, rep.r, rep.slices, rep.chosen_e,
                     rep.q_at_e, rep.threshold, rep.succeeded])
    return header, rows, EXIT_OK


def cmd_qamc_micro(config):
    model = ising.IsingModel(g=float(config["g"]), h=float(config["h"]),
                             n_sites=int(config["n"]))
    base = device.FreeFermionSource(model)
    obs = ising.magnetization_blocks(model)
    energies = np.arange(float(config["e_min"]),
                         float(config["e_max"]) + 1e-9,
                         float(config["e_step"]))
    header = ["energy", "delta", "cutoff", "estimate", "standard_error",
              "acceptance_rate", "samples_used", "d_evaluations", "exact",
              "flag"]
    rows = []
    code = EXIT_OK
    chain = 0
    for delta in _floats(config["deltas"]):
        expn = filters.build_expansion(filters.FilterSpec(
            delta=delta, n_sites=model.n_sites,
            x=float(config.get("x", 3.0))))
        for cutoff in _floats(config.get("cutoffs", "0")):
            for energy in energies:
                source = _noisy(base, dict(config,
                                           noise_seed=device.child_seed(
                                               int(config.get("seed", 0)),
                                               1000 + chain)))
                cfg = qamc.McConfig(
                    samples=int(config.get("samples", 100000)),
                    burn_in=int(config.get("burn_in", 1000)),
                    seed=device.child_seed(int(config.get("seed", 0)), chain),
                    cutoff=float(cutoff))
                chain += 1
                try:
                    trace = qamc.metropolis_micro(source, model, obs,
                                                  float(energy), expn, cfg)
                except qamc.ColdStartError:
                    rows.append([float(energy), delta, cutoff, None, None,
                                 None, 0, 0, None, "cold-start"])
                    code = max(code, EXIT_UNRESOLVABLE)
                    continue
                try:
                    exact = ising.exact_microcanonical(model, obs,
                                                       float(energy), expn)
                except ising.UnresolvableEnergyError:
                    exact = None
                if trace.flag:
                    code = max(code, EXIT_NONCONVERGED)
                rows.append([float(energy), delta, cutoff, trace.estimate,
                             trace.standard_error, trace.acceptance_rate,
                             trace.samples_used, trace.d_evaluations, exact,
                             trace.flag])
    return header, rows, code


def cmd_qamc_canonical(config):
    pairs = []
    for tok in str(config["pairs"]).split(","):
        g_txt, h_txt = tok.split(":")
        pairs.append((float(g_txt), float(h_txt)))
    delta = float(config.get("delta", 1.0))
    header = ["g", "h", "beta", "delta", "cutoff", "estimate",
              "standard_error", "acceptance_rate", "samples_used",
              "d_evaluations", "exact", "flag"]
    rows = []
    code = EXIT_OK
    chain = 0
    for g, h in pairs:
        model = ising.IsingModel(g=g, h=h, n_sites=int(config["n"]))
        base = device.FreeFermionSource(model)
        obs = ising.magnetization_blocks(model)
        expn = filters.build_expansion(filters.FilterSpec(
            delta=delta, n_sites=model.n_sites,
            x=float(config.get("x", 3.0))))
        grid = (float(config["grid_min"]), float(config["grid_max"]),
                float(config["grid_step"]))
        for cutoff in _floats(config.get("cutoffs", "0")):
            for beta in _floats(config["betas"]):
                source = _noisy(base, dict(config,
                                           noise_seed=device.child_seed(
                                               int(config.get("seed", 0)),
                                               1000 + chain)))
                cfg = qamc.McConfig(
                    samples=int(config.get("samples", 100000)),
                    burn_in=int(config.get("burn_in", 1000)),
                    seed=device.child_seed(int(config.get("seed", 0)), chain),
                    cutoff=float(cutoff), energy_grid=grid)
                chain += 1
                try:
                    trace = qamc.metropolis_canonical(source, model, obs,
                                                      beta, expn, cfg)
                except qamc.ColdStartError:
                    rows.append([g, h, beta, delta, cutoff, None, None, None,
                                 0, 0, None, "cold-start"])
                    code = max(code, EXIT_UNRESOLVABLE)
                    continue
                exact = ising.exact_canonical(model, obs, beta)
                if trace.flag:
                    code = max(code, EXIT_NONCONVERGED)
                rows.append([g, h, beta, delta, cutoff, trace.estimate,
                             trace.standard_error, trace.acceptance_rate,
                             trace.samples_used, trace.d_evaluations, exact,
                             trace.flag])
    return header, rows, code


def cmd_bounds_check(config):
    rng = np.random.Generator(np.random.PCG64(int(config.get("seed", 7))))
    n_samples = int(config.get("samples", 10000))
    crossover = filters.COS_GAUSS_CROSSOVER
    outer_right = 0.9 * math.pi
    regimes = {
        "gaussian-window": (0.0, 0.566 * math.pi),
        "outer-window": (crossover, outer_right),
        "small-argument": (0.0, 0.1),
    }
    header = ["regime", "samples", "violations", "worst_margin"]
    rows = []
    total_violations = 0
    slack = 1.0 + 1e-11  # double-rounding slack; the bounds saturate
    for name, (lo, hi) in regimes.items():
        x = rng.uniform(lo, hi, n_samples) * rng.choice([-1.0, 1.0], n_samples)
        m_orders = 2 * rng.integers(1, 5001, n_samples)
        worst = -np.inf
        violations = 0
        for m in np.unique(m_orders):
            sel = m_orders == m
            f = filters.gaussian_cos_gap(int(m), x[sel])
            if name == "gaussian-window":
                bound = np.exp(-0.5 * m * x[sel] ** 2)
                ok = np.abs(f) <= bound * slack + 1e-300
            elif name == "outer-window":
                bound = np.abs(math.cos(outer_right)) ** m
                ok = np.abs(f) <= bound * slack + 1e-300
            else:
                bound = m * x[sel] ** 4 / 12.0
                ok = (f >= 0.0) & (f <= bound * slack + 1e-300)
            violations += int((~ok).sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(bound > 0, np.abs(f) / np.where(bound > 0,
                                                                 bound, 1.0), 0.0)
            worst = max(worst, float(ratio.max()))
        rows.append([name, n_samples, violations, worst])
        total_violations += violations
    return header, rows, EXIT_OK if total_violations == 0 else EXIT_VIOLATIONS


def cmd_sign_reconstruct(config):
    n = int(config.get("n", 8))
    rng = np.random.Generator(np.random.PCG64(int(config.get("seed", 5))))
    fields = rng.uniform(0.4, 1.1, n)
    model = dense.build_xy_chain(float(config.get("jx", 1.0)), 0.0, fields, n)
    state = dense.xy_parity_eigenstate(n)
    dt = float(config.get("dt", 0.01))
    t_max = float(config.get("t_max", 20.0))
    times = np.arange(0.0, t_max + dt / 2, dt)
    amps = dense.amplitude_series(model, state, times)
    abs2 = np.abs(amps) ** 2
    try:
        rec = device.reconstruct_signed(abs2, dt=dt,
                                        zero_tol=float(config.get("zero_tol",
                                                                  0.05)))
    except device.UnresolvedZeroError as err:
        print(f"sign reconstruction failed: {err}", file=sys.stderr)
        return (["t", "abs2"], [[t, a] for t, a in zip(times, abs2)],
                EXIT_UNRESOLVABLE)
    exact = amps.real
    header = ["t", "abs2", "reconstructed", "exact", "abs_error"]
    rows = [[t, a2, r, e, abs(r - e)]
            for t, a2, r, e in zip(times, abs2, rec, exact)]
    return header, rows, EXIT_OK


def cmd_crosscheck(config):
    n = int(config.get("n", 8))
    seed = int(config.get("seed", 9))
    rng = np.random.Generator(np.random.PCG64(seed))
    g, h = float(config.get("g", 1.0)), float(config.get("h", 2.0))
    model = ising.IsingModel(g, h, n)
    dm = dense.build_fermion_chain(g, h, n)
    ff = device.FreeFermionSource(model)
    ds = device.DenseSource(dm)
    checks = []

    hk = ising.block_hamiltonians(model)
    evs = np.linalg.eigvalsh(hk)
    total = np.zeros(1)
    for k in range(model.n_blocks):
        total = (total[:, None] + evs[k][None, :]).ravel()
    checks.append(("spectrum-multiset", 1,
                   float(np.abs(np.sort(total) - np.sort(dm.spectrum())).max()),
                   1e-10))

    mag_b = ising.magnetization_blocks(model)
    mag_d = dense.magnetization_diagonal(n)
    amp_err = obs_err = mom_err = eig_err = 0.0
    times = np.linspace(-3.0, 3.0, 31)
    n_cases = 20
    for _ in range(n_cases):
        st = ising.random_fock_state(model, rng)
        vec = dense.fock_state_vector(n, st.occupied_modes(n))
        amp_err = max(amp_err, float(np.abs(
            ff.amplitude_series(st, times) - ds.amplitude_series(vec, times)).max()))
        obs_err = max(obs_err, float(np.abs(
            ff.observable_series(st, mag_b, times)
            - ds.observable_series(vec, mag_d, times)).max()))
        e1, s1 = ff.moments(st)
        e2, s2 = ds.moments(vec)
        mom_err = max(mom_err, abs(e1 - e2), abs(s1 ** 2 - s2 ** 2))
        eig_err = max(eig_err, abs(mag_b.fock_eigenvalue(st) - float(
            np.vdot(vec.vector, mag_d * vec.vector).real)))
    checks.append(("amplitudes", n_cases, amp_err, 1e-10))
    checks.append(("observable-amplitudes", n_cases, obs_err, 1e-10))
    checks.append(("moments", n_cases, mom_err, 1e-9))
    checks.append(("diagonal-eigenvalues", n_cases, eig_err, 1e-12))

    can_err = 0.0
    vals, vecs = dm.eigensystem()
    a_eig = np.einsum("si,si->i", vecs.conj(), mag_d[:, None] * vecs).real
    for beta in (0.0, 0.5, 1.0, 2.0, 5.0):
        w = np.exp(-beta * (vals - vals.min()))
        ref = float((w * a_eig).sum() / w.sum())
        can_err = max(can_err, abs(ising.exact_canonical(model, mag_b, beta) - ref))
    checks.append(("canonical", 5, can_err, 1e-10))

    tr_err = 0.0
    expn = filters.build_expansion(filters.FilterSpec(delta=1.0, n_sites=n, x=3.0))
    for energy in np.linspace(-n / 4, n / 4, 5):
        phases = np.exp(1j * float(energy) * expn.times)
        tra = np.array([(np.exp(-1j * t * vals) * a_eig).sum()
                        for t in expn.times]) / 2 ** n
        trd = np.array([np.exp(-1j * t * vals).sum()
                        for t in expn.times]) / 2 ** n
        ref = float((expn.coeffs * phases * tra).sum().real
                    / (expn.coeffs * phases * trd).sum().real)
        got = ising.exact_microcanonical(model, mag_b, float(energy), expn)
        tr_err = max(tr_err, abs(got - ref))
    checks.append(("filtered-trace", 5, tr_err, 1e-10))

    header = ["check", "n_cases", "max_error", "tolerance", "passed"]
    rows = [[name, cases, err, tol, err <= tol]
            for name, cases, err, tol in checks]
    ok = all(r[-1] for r in rows)
    return header, rows, EXIT_OK if ok else EXIT_VIOLATIONS


COMMANDS = {
    "ldos": cmd_ldos,
    "filtered": cmd_filtered,
    "double-filtered": cmd_double_filtered,
    "find-energy": cmd_find_energy,
    "qamc-micro": cmd_qamc_micro,
    "qamc-canonical": cmd_qamc_canonical,
    "bounds-check": cmd_bounds_check,
    "sign-reconstruct": cmd_sign_reconstruct,
    "crosscheck": cmd_crosscheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cosfilt",
        description="Energy-filtered and thermal observables from "
                    "time-series amplitudes.")
    parser.add_argument("command", choices=sorted(COMMANDS),
                        help="operation to run")
    parser.add_argument("--preset", help="named parameter preset "
                        f"({', '.join(sorted(PRESETS))})")
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", default="out.csv", help="CSV output path")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--threads", type=int, default=1,
                        help="independent chains merged per sampler point "
                             "(kept for interface compatibility; single "
                             "chain by default)")
    return parser


def _apply_overrides(config: dict, extra: list[str]):
    if len(extra) % 2 != 0:
        raise ValueError(f"overrides must come in --key value pairs: {extra}")
    for key, value in zip(extra[::2], extra[1::2]):
        if not key.startswith("--"):
            raise ValueError(f"expected --key, got {key!r}")
        config[key[2:].replace("-", "_")] = parse_scalar(value)


def run(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    config: dict = {}
    try:
        if args.preset is not None:
            if args.preset not in PRESETS:
                raise ValueError(f"unknown preset {args.preset!r}")
            config.update(PRESETS[args.preset])
            preset_command = config.pop("command")
            if preset_command != args.command:
                raise ValueError(
                    f"preset {args.preset!r} belongs to command "
                    f"{preset_command!r}")
        if args.config:
            config.update(read_config_file(args.config))
        _apply_overrides(config, extra)
        if args.seed is not None:
            config["seed"] = args.seed
        config.setdefault("seed", 0)
        config["threads"] = args.threads
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE

    start = time.time()
    try:
        header, rows, code = COMMANDS[args.command](dict(config))
    except (ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (estimators.UnresolvableEnergyError,
            ising.UnresolvableEnergyError) as err:
        print(f"unresolvable energy: {err}", file=sys.stderr)
        return EXIT_UNRESOLVABLE

    write_csv(args.out, header, rows)
    sidecar = {
        "command": args.command,
        "preset": args.preset,
        "config": {k: config[k] for k in sorted(config)},
        "seed": config.get("seed"),
        "version": _pkg_version("cosfilt"),
        "wall_time_s": round(time.time() - start, 3),
        "rows": len(rows),
        "output": args.out,
        "exit_code": code,
    }
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{args.command}: wrote {len(rows)} rows to {args.out} "
          f"(exit {code})")
    return code


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
