"""Acceptance criteria, one pass/fail line per criterion in the terminal summary."""
import csv
import io
import time

import numpy as np
import pytest

from conftest import record
from ionphase import cli, detection, gaussian, phases
from ionphase.chain import Direction, IonChainSpec, critical_ratio, normal_modes

C1 = "1 stability threshold"
C2 = "2 scalar values at ratio 1.7"
C3 = "3 E_N0 value and monotone decay"
C4 = "4 closed form vs symplectic oracle"
C5 = "5 phase diagram vs brute force"
C6 = "6 death-revival band width"
C7 = "7 trace presets"
C8 = "8 detection round trip"
C9 = "9 physicality of emitted states"


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def check(criterion, ok, detail):
    record(criterion, bool(ok), detail)
    assert ok, detail


def test_c1_stability_threshold():
    with Timer() as t:
        crit = critical_ratio()
    check(C1, abs(crit - 1.673) <= 0.002, f"critical ratio {crit:.5f}")
    check(C1, t.elapsed < 1.0, f"{t.elapsed:.3f} s")


def test_c2_scalar_values():
    with Timer() as t:
        trans = phases.critical_params(normal_modes(IonChainSpec(freq_ratio=1.7)))
        axial = phases.critical_params(normal_modes(IonChainSpec(direction=Direction.AXIAL)))
    ok = (
        abs(trans.r_crit - 0.30) <= 0.01
        and abs(trans.S_min - 0.12) <= 0.01
        and abs(axial.r_crit - 0.14) <= 0.01
        and abs(axial.S_min - 0.04) <= 0.01
    )
    check(
        C2,
        ok,
        f"transverse r_crit {trans.r_crit:.4f} S_min {trans.S_min:.4f}; "
        f"axial r_crit {axial.r_crit:.4f} S_min {axial.S_min:.4f}",
    )
    check(C2, t.elapsed < 1.0, f"{t.elapsed:.3f} s")


def test_c3_value_at_default_ratio():
    e0 = phases.critical_params(normal_modes(IonChainSpec(freq_ratio=1.7))).E_N0
    check(C3, abs(e0 - 0.18) <= 0.02, f"E_N0(1.7) = {e0:.4f}")


def test_c3_monotone_decay():
    with Timer() as t:
        rows = phases.params_sweep(IonChainSpec(), np.linspace(1.7, 5.0, 200))
    e = np.array([row.E_N0 for row in rows])
    rises = np.flatnonzero(np.diff(e) > 0)
    detail = f"E_N0(5.0) = {e[-1]:.4f}, {rises.size} increasing steps"
    if rises.size:
        detail += f", first at ratio {rows[rises[0]].ratio:.3f}, max after zero {e[rises[0]:].max():.4f}"
    check(C3, t.elapsed < 5.0, f"sweep {t.elapsed:.3f} s")
    check(C3, all(row.stable for row in rows) and rises.size == 0, detail)


def test_c4_oracle_equivalence():
    rng = np.random.default_rng(20240)
    worst = 0.0
    with Timer() as t:
        for _ in range(1000):
            modes = normal_modes(IonChainSpec(freq_ratio=rng.uniform(1.7, 5.0)))
            n, r = rng.uniform(0, 4), rng.uniform(0, 2)
            state = phases.build_asymptotic_state(modes, n, r)
            quarter = 0.5 * phases.negativity_period(modes)
            closed = phases.extremal_negativities(modes, n, r)
            for moment, expected in zip((0.0, quarter), closed):
                numeric = gaussian.log_negativity(phases.evolve(state, moment, modes.omega_odd))
                worst = max(worst, abs(numeric - expected))
    check(C4, worst <= 1e-9, f"max deviation {worst:.2e}")
    check(C4, t.elapsed < 10.0, f"{t.elapsed:.2f} s")


def test_c5_phase_diagram_oracle():
    modes = normal_modes(IonChainSpec())
    n_grid, r_grid = np.linspace(0, 3, 50), np.linspace(0, 1.5, 50)
    with Timer() as t:
        closed = phases.phase_diagram(modes, n_grid, r_grid).codes
        d_persist, d_revive = phases.phase_discriminants(modes, n_grid[:, None], r_grid[None, :])
        interior = (np.abs(d_persist) > 1e-6) & (np.abs(d_revive) > 1e-6)
        mismatches, compared = 0, 0
        for i, n in enumerate(n_grid):
            for j, r in enumerate(r_grid):
                if not interior[i, j]:
                    continue
                sup_en, inf_en = phases.brute_force_extrema(modes, n, r)
                code = phases.PHASE_ORDER.index(phases.label_from_extrema(sup_en, inf_en))
                compared += 1
                mismatches += code != closed[i, j]
    counts = np.bincount(closed.ravel(), minlength=3)
    check(C5, mismatches == 0, f"{mismatches} mismatches in {compared} cells, phase counts {counts.tolist()}")
    check(C5, t.elapsed < 60.0, f"{t.elapsed:.1f} s")


def test_c6_band_width():
    modes = normal_modes(IonChainSpec())
    target = 2 * phases.critical_params(modes).r_crit
    r_fine = np.linspace(0, 2.5, 5001)
    r_oracle = np.linspace(0, 2.5, 501)
    worst, details = 0.0, []
    with Timer() as t:
        for n in (2.0, 2.5, 3.0, 5.0):
            lo, hi = phases.death_revival_band(modes, n, r_fine)
            rel = abs((hi - lo) - target) / target
            # independent check of the band edges through the time-grid oracle
            codes = [
                phases.label_from_extrema(*phases.brute_force_extrema(modes, n, r)) is phases.Phase.DEATH_REVIVAL
                for r in r_oracle
            ]
            idx = np.flatnonzero(codes)
            rel_oracle = abs((r_oracle[idx[-1]] - r_oracle[idx[0]]) - target) / target
            worst = max(worst, rel, rel_oracle)
            details.append(f"n={n:g}: {hi - lo:.4f}/{r_oracle[idx[-1]] - r_oracle[idx[0]]:.4f}")
    check(C6, worst <= 0.02, f"2 r_crit = {target:.4f}; " + ", ".join(details) + f"; worst {100 * worst:.2f}%")
    check(C6, t.elapsed < 30.0, f"{t.elapsed:.1f} s")


def test_c7_trace_presets():
    modes = normal_modes(IonChainSpec())
    period = phases.negativity_period(modes)
    times = np.linspace(0, 20, 2001)
    with Timer() as t:
        traces = {name: phases.negativity_trace(modes, n, r, times)[1] for name, (n, r) in cli.TRACE_PRESETS.items()}
        shifted = {name: phases.negativity_trace(modes, n, r, times + period)[1] for name, (n, r) in cli.TRACE_PRESETS.items()}
    black = traces["black"]
    check(C7, black.min() > 0 and np.ptp(black) < 1e-9, f"(0,0) trace {black.min():.4f}, spread {np.ptp(black):.1e}")

    def dies_and_revives(e):
        dead = e <= phases.PHASE_TOL
        # a zero interval followed by positive values again
        return dead.any() and (~dead).any() and np.any(dead[:-1] & ~dead[1:])

    revivers = [name for name, e in traces.items() if dies_and_revives(e)]
    check(C7, bool(revivers), f"death and revival in {revivers}")
    drift = max(np.max(np.abs(shifted[k] - traces[k])) for k in traces)
    check(C7, drift <= 1e-9, f"period pi/omega_odd = {period:.6f}, drift {drift:.1e}")
    check(C7, t.elapsed < 5.0, f"{t.elapsed:.2f} s")


def random_mode_covariance(rng):
    nu = rng.uniform(0.5, 3.0)
    S = gaussian.rotation(rng.uniform(0, np.pi)) @ gaussian.squeezer(rng.uniform(-1, 1))
    return nu * S @ S.T


def test_c8_detection_round_trip():
    rng = np.random.default_rng(8)
    with Timer() as t:
        worst = 0.0
        for _ in range(1000):
            C = random_mode_covariance(rng)
            rec = detection.reconstruct(*detection.scan_pair(C))
            truth = np.array([C[0, 0], C[1, 1], abs(C[0, 1])])
            worst = max(worst, np.max(np.abs(rec.entries - truth)))
        check(C8, worst < 1e-6, f"noiseless max error {worst:.1e}")

        covered = 0
        for k in range(500):
            C = random_mode_covariance(rng)
            rec = detection.reconstruct(*detection.scan_pair(C, shots=10**4, seeds=(2 * k, 2 * k + 1)))
            truth = np.array([C[0, 0], C[1, 1], abs(C[0, 1])])
            covered += bool(np.all(np.abs(rec.entries - truth) <= 3 * rec.std_errors))
    check(C8, covered >= 475, f"{covered}/500 trials within 3 SE on all entries")
    check(C8, t.elapsed < 60.0, f"{t.elapsed:.1f} s")


class PhysicalitySpy:
    def __init__(self):
        self.margins = []

    def note(self, matrix):
        m = np.asarray(matrix.matrix if isinstance(matrix, gaussian.CovarianceState) else matrix, float)
        stack = m.reshape(-1, *m.shape[-2:])
        self.margins.extend((gaussian.symplectic_eigenvalues(stack)[:, 0] - 0.5).tolist())

    def wrap_result(self, fn):
        def inner(*args, **kwargs):
            out = fn(*args, **kwargs)
            if isinstance(out, dict):
                for value in out.values():
                    self.note(value)
            else:
                self.note(out)
            return out

        return inner

    def wrap_argument(self, fn):
        def inner(matrices, *args, **kwargs):
            self.note(matrices)
            return fn(matrices, *args, **kwargs)

        return inner


CLI_RUNS = [
    ["modes"],
    ["sweep"],
    ["trace"],
    *(["trace", "--preset", name] for name in cli.TRACE_PRESETS),
    ["trace", "--direction", "axial", "--preset", "blue"],
    ["phase-diagram", "--grid", "41x41"],
    ["phase-diagram", "--direction", "axial", "--grid", "21x21"],
    *(["detect", "--preset", name] for name in cli.TRACE_PRESETS),
    ["detect", "--preset", "blue", "--shots", "10000", "--seed", "1"],
]


def test_c9_physicality(monkeypatch, capsys):
    spy = PhysicalitySpy()
    monkeypatch.setattr(phases, "build_asymptotic_state", spy.wrap_result(phases.build_asymptotic_state))
    monkeypatch.setattr(phases, "evolve", spy.wrap_result(phases.evolve))
    monkeypatch.setattr(detection, "state_mode_covariances", spy.wrap_result(detection.state_mode_covariances))
    monkeypatch.setattr(gaussian, "log_negativity_batch", spy.wrap_argument(gaussian.log_negativity_batch))
    codes = []
    for argv in CLI_RUNS:
        codes.append(cli.main(argv))
        out = capsys.readouterr().out
        if argv[0] == "phase-diagram":
            # the diagram is closed form; rebuild the state behind every cell
            spec = IonChainSpec(direction=Direction(argv[2] if argv[1] == "--direction" else "transverse"))
            modes = normal_modes(spec)
            table = list(csv.reader(io.StringIO(out)))[1:]
            for n, r, *_ in table:
                state = phases.build_asymptotic_state(modes, float(n), float(r))
                spy.note(phases.evolved_matrices(state, [0.0, 0.5 * phases.negativity_period(modes)], modes.omega_odd))
    worst = min(spy.margins)
    check(C9, all(c == 0 for c in codes), f"exit codes {codes}")
    check(C9, worst >= -1e-9, f"{len(spy.margins)} states, smallest margin {worst:.2e}")
