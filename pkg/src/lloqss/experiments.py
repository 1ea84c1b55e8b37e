"""Experiment configuration and the command runner behind the CLI.

A configuration is an INI file whose ``[section]`` / ``key`` pairs become
dotted keys such as ``channel.distance``, or an equivalent JSON document
(nested objects or dotted keys).  Environment variables prefixed with
``LLOQSS_`` override file values, with ``__`` standing for the dot:
``LLOQSS_CHANNEL__DISTANCE=80``.
"""

from __future__ import annotations

import configparser
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compensation import blockwise_compensation, compensate
from .config import ChannelGeometry, DetectorParams, SystemConfig, place_users
from .errors import ConfigError, InvalidArgumentError
from .keyrate import plob_bound
from .noise import BUDGET_COLUMNS, noise_budget
from .optimize import (ScanSpec, max_distance, optimal_reference_intensity,
                       optimal_reference_intensity_bisect, rate_at, run_scan)
from .output import atomic_write_text, write_csv
from .protocol import run_protocol
from .quadrature import random_stream
from .simulation import (SimulationParams, estimate_transmittances, simulate_block,
                         write_frames_csv)

ENV_PREFIX = "LLOQSS_"

COMMANDS = ("keyrate", "scan-distance", "scan-variance", "scan-ratio", "scan-users",
            "optimize-ref", "simulate", "protocol")

EXIT_OK, EXIT_CONFIG, EXIT_NO_RATE, EXIT_NUMERIC = 0, 2, 3, 4


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s) -> tuple[float, ...]:
    if isinstance(s, (list, tuple)):
        return tuple(float(v) for v in s)
    if isinstance(s, (int, float)):
        return (float(s),)
    return tuple(float(v) for v in str(s).replace(";", ",").split(",") if v.strip())


def _ints(s) -> tuple[int, ...]:
    return tuple(int(v) for v in _floats(s))


def _opt_floats(s):
    if s is None or str(s).strip().lower() in ("", "none", "default"):
        return None
    return _floats(s)


SCHEMA = {
    "run.command": str,
    "run.seed": int,
    "run.out": str,
    "run.frames": int,
    "channel.alpha": float,
    "channel.distance": float,
    "channel.segments": _opt_floats,
    "channel.n_users": int,
    "channel.placement": str,
    "channel.spacing": float,
    "protocol.beta": float,
    "protocol.eps_ch": float,
    "protocol.eps_rest": float,
    "protocol.v_slow": float,
    "protocol.modulation_variances": _floats,
    "protocol.max_amplitudes": _opt_floats,
    "hardware.adc_bits": int,
    "hardware.extinction_ratio_db": float,
    "hardware.am_dynamic_db": float,
    "detector.eta": float,
    "detector.v_el": float,
    "reference.intensity": float,
    "reference.optimize": _bool,
    "simulation.walk_step": float,
    "simulation.initial_delays": _floats,
    "simulation.fast_drift": _bool,
    "simulation.reference_noise": _bool,
    "simulation.detection_noise": _bool,
    "simulation.eps_sim": float,
    "simulation.subtraction": str,
    "simulation.estimator": str,
    "simulation.phase_fraction": float,
    "simulation.transmittance_fraction": float,
    "simulation.subtraction_fraction": float,
    "simulation.block_size": int,
    "simulation.dump_frames": _bool,
    "scan.min": float,
    "scan.max": float,
    "scan.step": float,
    "scan.points": int,
    "scan.distance": float,
    "scan.distances": _floats,
    "scan.users": _ints,
    "scan.v1_max": float,
    "scan.v2_max": float,
    "scan.tolerable": _bool,
    "scan.fixed_intensities": _floats,
    "broadcast.message": str,
}

DEFAULTS = {
    "run.command": "keyrate",
    "run.seed": 0,
    "run.out": "out",
    "run.frames": 100_000,
    "channel.alpha": 0.2,
    "channel.distance": 20.0,
    "channel.segments": None,
    "channel.n_users": 2,
    "channel.placement": "symmetric",
    "channel.spacing": 1.0,
    "protocol.beta": 0.95,
    "protocol.eps_ch": 0.002,
    "protocol.eps_rest": 0.0,
    "protocol.v_slow": 0.0,
    "protocol.modulation_variances": (4.0,),
    "protocol.max_amplitudes": None,
    "hardware.adc_bits": 10,
    "hardware.extinction_ratio_db": 60.0,
    "hardware.am_dynamic_db": 40.0,
    "detector.eta": 1.0,
    "detector.v_el": 0.0,
    "reference.intensity": 2000.0,
    "reference.optimize": True,
    "simulation.walk_step": 1e-3,
    "simulation.initial_delays": (0.0, 0.0, 0.0),
    "simulation.fast_drift": True,
    "simulation.reference_noise": True,
    "simulation.detection_noise": True,
    "simulation.eps_sim": 0.0,
    "simulation.subtraction": "matched",
    "simulation.estimator": "correlation",
    "simulation.phase_fraction": 0.1,
    "simulation.transmittance_fraction": 0.1,
    "simulation.subtraction_fraction": 0.1,
    "simulation.block_size": 10_000,
    "simulation.dump_frames": False,
    "scan.min": 0.1,
    "scan.max": 120.0,
    "scan.step": 1.0,
    "scan.points": 20,
    "scan.distance": 5.0,
    "scan.distances": (),
    "scan.users": (2, 5, 10, 25, 30),
    "scan.v1_max": 15.0,
    "scan.v2_max": 25.0,
    "scan.tolerable": True,
    "scan.fixed_intensities": (2000.0, 3800.0, 6500.0),
    "broadcast.message": "secret shared by all users",
}


@dataclass
class ExperimentConfig:
    """Validated experiment settings: the system plus run and scan options."""

    system: SystemConfig
    simulation: SimulationParams
    values: dict = field(default_factory=dict)

    @property
    def command(self) -> str:
        return self.values["run.command"]

    @property
    def seed(self) -> int:
        return self.values["run.seed"]

    @property
    def out(self) -> Path:
        return Path(self.values["run.out"])

    @property
    def frames(self) -> int:
        return self.values["run.frames"]

    def __getitem__(self, key):
        return self.values[key]


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def read_config_file(path) -> dict:
    """Raw dotted key/value pairs from an INI or JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            return _flatten(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    return {f"{sec}.{k}": v for sec in parser.sections() for k, v in parser[sec].items()}


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for k, v in environ.items():
        if k.startswith(ENV_PREFIX):
            out[k[len(ENV_PREFIX):].lower().replace("__", ".")] = v
    return out


def build_config(*sources: dict) -> ExperimentConfig:
    """Merge raw sources over the defaults (later wins) and validate."""
    values = dict(DEFAULTS)
    for src in sources:
        for key, raw in src.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                values[key] = None
                continue
            try:
                values[key] = SCHEMA[key](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    if values["run.command"] not in COMMANDS:
        raise ConfigError(f"unknown command {values['run.command']!r}; choose from {COMMANDS}")
    if values["run.seed"] < 0 or values["run.frames"] < 1:
        raise ConfigError("seed must be >= 0 and frames >= 1")
    try:
        system = _system_from(values)
        sim = SimulationParams(
            walk_step=values["simulation.walk_step"],
            initial_delays=tuple(values["simulation.initial_delays"]),
            fast_drift=values["simulation.fast_drift"],
            reference_noise=values["simulation.reference_noise"],
            detection_noise=values["simulation.detection_noise"],
            eps_sim=values["simulation.eps_sim"],
            subtraction=values["simulation.subtraction"],
            estimator=values["simulation.estimator"],
            phase_fraction=values["simulation.phase_fraction"],
            transmittance_fraction=values["simulation.transmittance_fraction"],
            subtraction_fraction=values["simulation.subtraction_fraction"],
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    if len(sim.initial_delays) != 3:
        raise ConfigError("simulation.initial_delays needs three phases")
    return ExperimentConfig(system, sim, values)


def _system_from(v: dict) -> SystemConfig:
    if v["channel.segments"] is not None:
        geom = ChannelGeometry(v["channel.alpha"], v["channel.segments"])
    else:
        geom = place_users(v["channel.distance"], v["channel.n_users"], v["channel.placement"],
                           v["channel.alpha"], v["channel.spacing"])
    n = geom.n_users
    vu = v["protocol.modulation_variances"]
    if len(vu) == 1:
        vu = vu * n
    amps = v["protocol.max_amplitudes"]
    if amps is not None and len(amps) == 1:
        amps = amps * n
    return SystemConfig(
        beta=v["protocol.beta"], eps_ch=v["protocol.eps_ch"], adc_bits=v["hardware.adc_bits"],
        extinction_ratio_db=v["hardware.extinction_ratio_db"],
        am_dynamic_db=v["hardware.am_dynamic_db"], modulation_variances=vu,
        max_amplitudes=amps, ref_intensity=v["reference.intensity"], v_slow=v["protocol.v_slow"],
        eps_rest=v["protocol.eps_rest"],
        detector=DetectorParams(v["detector.eta"], v["detector.v_el"]), geometry=geom,
        placement=v["channel.placement"], spacing=v["channel.spacing"])


def load_config(path=None, overrides: dict | None = None, environ=None) -> ExperimentConfig:
    sources = []
    if path is not None:
        sources.append(read_config_file(path))
    sources.append(env_overrides(environ))
    if overrides:
        sources.append(overrides)
    return build_config(*sources)


# --------------------------------------------------------------------------- commands

@dataclass
class RunResult:
    status: int
    summary: str
    artifacts: dict[str, Path] = field(default_factory=dict)
    data: dict = field(default_factory=dict)


SCAN_COLUMNS = ("R_bits_per_pulse", "eps_total", "eps_tolerable", "alpha_R1_sq_opt") + tuple(
    c for c in BUDGET_COLUMNS if c != "eps_total")


def _scan_rows(spec: ScanSpec, rows):
    for r in rows:
        b = r.budget.as_row()
        yield (*r.point, r.rate, b["eps_total"], r.eps_tolerable, r.ref_intensity,
               *(b[c] for c in BUDGET_COLUMNS if c != "eps_total"))


def _grid(ex: ExperimentConfig) -> tuple[float, ...]:
    lo, hi, step = ex["scan.min"], ex["scan.max"], ex["scan.step"]
    if not (step > 0 and hi > lo):
        raise ConfigError("scan grid needs scan.max > scan.min and scan.step > 0")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(float(v) for v in lo + step * np.arange(n))


def _cmd_keyrate(ex: ExperimentConfig) -> RunResult:
    cfg = ex.system
    res, a_r = rate_at(cfg, ex["reference.optimize"])
    rows = []
    for j, (link, v) in enumerate(zip(res.links, cfg.modulation_variances), start=1):
        t = link.inputs.T
        plob = plob_bound(t) if t < 1 else float("inf")
        rows.append((j, t, v, link.i_ud, link.chi_de, link.rate, plob))
    ex.out.mkdir(parents=True, exist_ok=True)
    arts = {
        "keyrate": write_csv(ex.out / "keyrate.csv",
                             ("link", "T", "V_U", "I_UD", "chi_DE", "R_bits_per_pulse",
                              "plob_bound"), rows),
        "budget": write_csv(ex.out / "budget.csv", ("alpha_R1_sq",) + BUDGET_COLUMNS,
                            [(a_r, *res.budget.as_row().values())]),
    }
    summary = (f"keyrate: L={cfg.geometry.total:g} km, users={cfg.n_users}, "
               f"|alpha_R1|^2={a_r:.6g}, eps_total={res.budget.eps_total:.6g}, "
               f"R={res.rate:.6g} bits/pulse (limiting link {res.limiting_link + 1})")
    return RunResult(EXIT_OK, summary, arts, {"result": res, "ref_intensity": a_r})


def _cmd_scan_distance(ex: ExperimentConfig) -> RunResult:
    spec = ScanSpec("distance", _grid(ex), ex.system,
                    optimize_reference=ex["reference.optimize"], tolerable=ex["scan.tolerable"])
    rows = run_scan(spec)
    cols = spec.columns + ("T1", "plob_bound") + SCAN_COLUMNS
    table = [(r[0], row.t1, plob_bound(row.t1) if row.t1 < 1 else float("inf"), *r[1:])
             for r, row in zip(_scan_rows(spec, rows), rows)]
    path = write_csv(ex.out / "scan_distance.csv", cols, table)
    l_max = max_distance(ex.system, optimize_reference=ex["reference.optimize"])
    status = EXIT_OK if l_max > 0 else EXIT_NO_RATE
    summary = f"scan-distance: {len(rows)} points, max distance {l_max:.3f} km"
    return RunResult(status, summary, {"scan": path}, {"rows": rows, "max_distance": l_max})


def _cmd_scan_variance(ex: ExperimentConfig) -> RunResult:
    n = ex["scan.points"]
    g1 = tuple(np.linspace(0, ex["scan.v1_max"], n + 1)[1:])
    g2 = tuple(np.linspace(0, ex["scan.v2_max"], n + 1)[1:])
    rows_all, arts, regions = [], {}, {}
    distances = ex["scan.distances"] or (ex["scan.distance"],)
    for L in distances:
        spec = ScanSpec("variance", g1, ex.system, grid2=g2, total_distance=L,
                        optimize_reference=ex["reference.optimize"])
        rows = run_scan(spec)
        regions[L] = {r.point for r in rows if r.rate > 0}
        rows_all += [(L, *r) for r in _scan_rows(spec, rows)]
    arts["scan"] = write_csv(ex.out / "scan_variance.csv",
                             ("L_km", "V_U1", "V_U2") + SCAN_COLUMNS, rows_all)
    summary = "scan-variance: " + ", ".join(
        f"{len(regions[L])}/{n * n} positive at {L:g} km" for L in distances)
    return RunResult(EXIT_OK, summary, arts, {"regions": regions})


def _cmd_scan_ratio(ex: ExperimentConfig) -> RunResult:
    n = ex["scan.points"]
    grid = tuple(np.linspace(0, 1, n + 2)[1:-1])
    distances = ex["scan.distances"] or (ex["scan.distance"],)
    table, data = [], {}
    for L in distances:
        spec = ScanSpec("ratio", grid, ex.system, total_distance=L,
                        optimize_reference=ex["reference.optimize"], tolerable=ex["scan.tolerable"])
        rows = run_scan(spec)
        data[L] = rows
        table += [(L, *r) for r in _scan_rows(spec, rows)]
    path = write_csv(ex.out / "scan_ratio.csv", ("L_km", "l1_over_L") + SCAN_COLUMNS, table)
    return RunResult(EXIT_OK, f"scan-ratio: {len(table)} points", {"scan": path}, {"rows": data})


def _cmd_scan_users(ex: ExperimentConfig) -> RunResult:
    grid = _grid(ex)
    users = ex["scan.users"]
    curve, summary_rows, lmax = [], [], {}
    for placement in ("symmetric", "asymmetric"):
        base = ex.system.replace(placement=placement)
        for n in users:
            for L in grid:
                cfg = base.with_distance(L, n)
                res, a_r = rate_at(cfg, ex["reference.optimize"])
                t1 = float(cfg.transmittances()[0])
                curve.append((placement, n, L, t1, res.rate,
                              plob_bound(t1) if t1 < 1 else float("inf"), res.budget.eps_total))
            lmax[placement, n] = max_distance(base, n_users=n,
                                              optimize_reference=ex["reference.optimize"])
            summary_rows.append((placement, n, lmax[placement, n]))
    arts = {
        "curves": write_csv(ex.out / "scan_users.csv",
                            ("placement", "n_users", "L_km", "T1", "R_bits_per_pulse",
                             "plob_bound", "eps_total"), curve),
        "max_distance": write_csv(ex.out / "max_distance_users.csv",
                                  ("placement", "n_users", "max_distance_km"), summary_rows),
    }
    summary = "scan-users: " + "; ".join(f"{p} n={n}: {d:.2f} km" for p, n, d in summary_rows)
    return RunResult(EXIT_OK, summary, arts, {"max_distance": lmax, "curve": curve})


def _cmd_optimize_ref(ex: ExperimentConfig) -> RunResult:
    fixed = ex["scan.fixed_intensities"]
    table = []
    for L in _grid(ex):
        cfg = ex.system.with_distance(L)
        a = optimal_reference_intensity(cfg)
        a_bis = optimal_reference_intensity_bisect(cfg)
        b = noise_budget(cfg, ref_intensity=a)
        sums = [noise_budget(cfg, ref_intensity=f) for f in fixed]
        table.append((L, a, a_bis, b.eps_error, b.eps_le, b.eps_error + b.eps_le,
                      *(s.eps_error + s.eps_le for s in sums)))
    cols = ("L_km", "alpha_R1_sq_opt", "alpha_R1_sq_bisect", "eps_error", "eps_le",
            "eps_error_plus_le") + tuple(f"sum_at_{f:g}" for f in fixed)
    path = write_csv(ex.out / "optimize_ref.csv", cols, table)
    return RunResult(EXIT_OK, f"optimize-ref: {len(table)} distances", {"table": path},
                     {"table": table})


def _cmd_simulate(ex: ExperimentConfig) -> RunResult:
    cfg = ex.system
    rng = random_stream(ex.seed, 0)
    block = simulate_block(cfg, ex.frames, rng, ex.simulation)
    bs = ex["simulation.block_size"]
    rows = []
    d1_true, d2_true = (np.broadcast_to(d, block.frame.shape) for d in block.delta_true)
    if ex.frames // bs >= 3:
        comp, ests = blockwise_compensation(block, bs, min(bs, 1000), ex.simulation.estimator)
        for k, (e1, e2) in enumerate(ests):
            sl = slice(k * bs, (k + 1) * bs)
            rows.append((k, bs, float(np.mean(d1_true[sl])), e1, float(np.mean(d2_true[sl])), e2))
        v_slow = comp.estimate.v_slow
    else:
        comp = compensate(block, min_samples=2, method=ex.simulation.estimator)
        e = comp.estimate
        rows.append((0, ex.frames, float(np.mean(d1_true)), e.delta1,
                     float(np.mean(d2_true)), e.delta2))
        v_slow = 0.0
    t_hat = estimate_transmittances(comp.user1, comp.user2, comp.dealer, block.eta, min_samples=2)
    arts = {"estimates": write_csv(
        ex.out / "simulate_estimates.csv",
        ("block", "frames", "delta1_true", "delta1_hat", "delta2_true", "delta2_hat"), rows)}
    if ex["simulation.dump_frames"]:
        buf = io.StringIO()
        write_frames_csv(buf, block)
        arts["frames"] = atomic_write_text(ex.out / "frames.csv", buf.getvalue())
    last = rows[-1]
    summary = (f"simulate: {ex.frames} frames, delta1 err {last[2] - last[3]:+.3e} rad, "
               f"delta2 err {last[4] - last[5]:+.3e} rad, V_slow={v_slow:.3e} rad^2, "
               f"T1_hat={t_hat[0]:.5f}, T2_hat={t_hat[1]:.5f}")
    return RunResult(EXIT_OK, summary, arts,
                     {"rows": rows, "t_hat": t_hat, "v_slow": v_slow, "block": block})


def _cmd_protocol(ex: ExperimentConfig) -> RunResult:
    cfg = ex.system
    message = ex["broadcast.message"].encode()
    res = run_protocol(cfg, ex.frames, random_stream(ex.seed, 0), ex.simulation,
                       ex["reference.optimize"], message, ex["simulation.block_size"])
    t_true = cfg.transmittances()
    rows = []
    for j in range(cfg.n_users):
        rows.append((j + 1, t_true[j], res.t_hat[j], res.subtraction_gain[j],
                     res.analytic.links[j].rate, res.estimated.links[j].rate))
    arts = {"links": write_csv(ex.out / "protocol_links.csv",
                               ("link", "T_true", "T_hat", "subtraction_gain",
                                "R_analytic", "R_estimated"), rows)}
    lines = [f"protocol: {ex.frames} frames, R={res.rate:.6g} bits/pulse "
             f"(analytic {res.analytic.rate:.6g}), T_hat={res.t_hat[0]:.5f}/{res.t_hat[1]:.5f}"]
    if res.ciphertext is None:
        lines.append("no positive key rate: no keys generated, nothing broadcast")
        status = EXIT_NO_RATE
    else:
        lines.append(f"broadcast {len(res.ciphertext)} bytes, decoded with all keys: "
                     f"{res.decoded == res.message}")
        arts["broadcast"] = atomic_write_text(ex.out / "broadcast.hex", res.ciphertext.hex() + "\n")
        status = EXIT_OK
    return RunResult(status, "\n".join(lines), arts, {"result": res})


_DISPATCH = {
    "keyrate": _cmd_keyrate,
    "scan-distance": _cmd_scan_distance,
    "scan-variance": _cmd_scan_variance,
    "scan-ratio": _cmd_scan_ratio,
    "scan-users": _cmd_scan_users,
    "optimize-ref": _cmd_optimize_ref,
    "simulate": _cmd_simulate,
    "protocol": _cmd_protocol,
}


def run(command: str, ex: ExperimentConfig) -> RunResult:
    """Run one command, write its artifacts under ``ex.out`` and a summary file."""
    if command not in _DISPATCH:
        raise ConfigError(f"unknown command {command!r}")
    ex.out.mkdir(parents=True, exist_ok=True)
    result = _DISPATCH[command](ex)
    result.artifacts["summary"] = atomic_write_text(
        ex.out / f"{command}_summary.txt", result.summary + "\n")
    return result
