"""Scenario runner: ``eprcomm simulate`` and ``eprcomm sweep``.

A run reads one JSON config, writes CSV tables plus ``summary.json`` to the
output directory and exits with 0 on success, 2 on a configuration or I/O
error and 3 when a sub-computation is infeasible. Output files are a pure
function of the config and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from . import adversary as adv
from . import nopa
from . import protocol as proto
from .errors import ConfigError, EprCommError, Infeasible
from .keyexchange import BASES, run_session

SCHEMA_VERSION = 1
SCENARIOS = ("spectra", "transfer", "fig2", "fig3", "tap_sweep", "keyexchange", "dense_coding")
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3

TRACE_COLUMNS = (
    "frame_index",
    "psi_a_db",
    "psi_b_db",
    "phi_minus_db",
    "psi_0a_db",
    "phi_0minus_db",
    "message_bit",
    # linear levels follow the fixed dB columns
    "psi_a",
    "psi_b",
    "phi_minus",
)

# Operating point fitted to the measured levels: +7 dB single beam, -0.4 dB difference floor.
EXPERIMENT_FIT = {"psi_a_db": 7.0, "phi_minus_db": -0.4}
EXPERIMENT_PARAMS = {"xi": 0.65, "eta": 0.75, "t2": 0.01, "omega": 0.1}
DEFAULT_EPSILON = {"fig2": 2.0, "fig3": 0.9}

PARAM_AXES = tuple(f.name for f in fields(nopa.NopaParams))
EVE_AXES = ("rho", "m", "delta_a", "delta_b")
AXES = PARAM_AXES + EVE_AXES + ("epsilon",)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int
    n_samples: int
    params: nopa.NopaParams
    message: proto.MessageConfig
    eve: adv.EveStrategy = field(default_factory=adv.EveStrategy)
    alphabet: tuple[float, float] = (0.0, 3.0)
    n_frames: int | None = None
    rho_grid: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0)
    snr_target: float = 1.0
    k_sigma: float = 3.0
    out_dir: Path = Path("out")


@dataclass
class ScenarioResult:
    results: dict[str, Any]
    tables: dict[str, tuple[tuple[str, ...], list[dict]]]
    status: int = EXIT_OK


# -- config -------------------------------------------------------------------


def _number(d: dict, key: str, default=None, kind=float):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"missing required field {key!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field {key!r} must be numeric, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"field {key!r} must be an integer")
        return int(v)
    return float(v)


def _params(raw: dict | None, scenario: str) -> nopa.NopaParams:
    if raw is None:
        raw = {"fit": dict(EXPERIMENT_FIT), **EXPERIMENT_PARAMS} if scenario in ("transfer", "fig2", "fig3", "tap_sweep") else {}
    if not isinstance(raw, dict):
        raise ConfigError("params must be an object")
    unknown = set(raw) - set(PARAM_AXES) - {"fit"}
    if unknown:
        raise ConfigError(f"unknown params fields: {sorted(unknown)}")
    try:
        if "fit" in raw:
            fit = raw["fit"]
            if not isinstance(fit, dict):
                raise ConfigError("params.fit must be an object")
            base = nopa.fit_operating_point(
                _number(fit, "psi_a_db"),
                _number(fit, "phi_minus_db"),
                xi=_number(raw, "xi", 0.65),
                omega=_number(raw, "omega", 0.1),
                eta=_number(raw, "eta", 1.0),
                t2=_number(raw, "t2", 0.01),
            )
            explicit = {k: _number(raw, k) for k in ("sigma", "n_common") if k in raw}
            return replace(base, **explicit)
        return nopa.NopaParams(**{k: _number(raw, k) for k in raw})
    except Infeasible as exc:
        raise ConfigError(f"params.fit: {exc}") from exc
    except EprCommError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"params: {exc}") from exc


def _message(raw: dict | None, scenario: str, n_samples: int) -> proto.MessageConfig:
    raw = dict(raw or {})
    unknown = set(raw) - {f.name for f in fields(proto.MessageConfig)}
    if unknown:
        raise ConfigError(f"unknown message fields: {sorted(unknown)}")
    frames = _number(raw, "frames", 100, int)
    if frames < 1 or n_samples % frames:
        raise ConfigError(f"n_samples={n_samples} must be a positive multiple of frames={frames}")
    pattern = raw.get("frame_pattern", [0, 1])
    if not isinstance(pattern, list):
        raise ConfigError("message.frame_pattern must be a list of bits")
    try:
        return proto.MessageConfig(
            epsilon=_number(raw, "epsilon", DEFAULT_EPSILON.get(scenario, 1.0)),
            beta_a=_number(raw, "beta_a", 0.0),
            beta_b=_number(raw, "beta_b", math.pi),
            frame_pattern=tuple(pattern),
            frames=frames,
            samples_per_frame=n_samples // frames,
            omega0_label=_number(raw, "omega0_label", 1.1e6),
        )
    except EprCommError as exc:
        raise ConfigError(f"message: {exc}") from exc


def _eve(raw: dict | None) -> adv.EveStrategy:
    raw = dict(raw or {"variant": "none"})
    unknown = set(raw) - {f.name for f in fields(adv.EveStrategy)}
    if unknown:
        raise ConfigError(f"unknown eve fields: {sorted(unknown)}")
    kwargs = {k: (_number(raw, k) if k in EVE_AXES else raw[k]) for k in raw}
    try:
        return adv.EveStrategy(**kwargs)
    except EprCommError as exc:
        raise ConfigError(f"eve: {exc}") from exc


def parse_config(doc: dict, seed: int | None = None, samples: int | None = None, out: str | None = None) -> ScenarioConfig:
    """Validate a config document; command-line overrides take precedence."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    scenario = doc.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if seed is None:
        if "seed" not in doc:
            raise ConfigError("seed is mandatory")
        seed = _number(doc, "seed", kind=int)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a non-negative 64-bit integer")
    n_samples = samples if samples is not None else _number(doc, "n_samples", 100_000, int)
    if n_samples < 2:
        raise ConfigError("n_samples must be at least 2")
    ke = doc.get("keyexchange", {}) or {}
    tap = doc.get("tap", {}) or {}
    alphabet = tuple(float(a) for a in ke.get("alphabet", (0.0, 3.0)))
    if len(alphabet) != 2:
        raise ConfigError("keyexchange.alphabet must have two amplitudes")
    out_dir = out if out is not None else (doc.get("output", {}) or {}).get("dir", "out")
    return ScenarioConfig(
        scenario=scenario,
        seed=seed,
        n_samples=n_samples,
        params=_params(doc.get("params"), scenario),
        message=_message(doc.get("message"), scenario, n_samples),
        eve=_eve(doc.get("eve")),
        alphabet=alphabet,
        n_frames=_number(ke, "n_frames", kind=int) if "n_frames" in ke else None,
        rho_grid=tuple(float(r) for r in tap.get("rho_grid", ScenarioConfig.rho_grid)),
        snr_target=_number(tap, "snr_target", 1.0),
        k_sigma=_number(doc, "k_sigma", 3.0),
        out_dir=Path(out_dir),
    )


def load_config(path: str | Path, **overrides) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, **overrides)


# -- scenarios ----------------------------------------------------------------


def _with_db(row: dict, keys) -> dict:
    out = dict(row)
    for k in keys:
        v = row[k]
        out[f"{k}_db"] = nopa.db(v) if v > 0 else float("-inf")
    return out


def _spectra(cfg: ScenarioConfig) -> ScenarioResult:
    sp = asdict(nopa.spectra(cfg.params))
    row = _with_db(sp, list(sp))
    cols = tuple(row)
    return ScenarioResult(row, {"spectra": (cols, [row])})


def _transfer(cfg: ScenarioConfig) -> ScenarioResult:
    eps = cfg.message.epsilon
    rows = []
    for source, params in (("quantum", cfg.params), ("classical", cfg.params.with_(sigma=0.0))):
        rep = asdict(nopa.transfer_coefficients(params, eps))
        rows.append({"source": source, **_with_db(rep, ("r0", "r_ab", "r_d", "r_r", "t_d"))})
    cols = tuple(rows[0])
    results = {"t_d": rows[0]["t_d"], "t_classical": rows[1]["t_d"], "r_d": rows[0]["r_d"], "r0": rows[0]["r0"]}
    return ScenarioResult(results, {"transfer": (cols, rows)})


def _estimate_dict(est: proto.SpectralEstimate) -> dict:
    return {
        "psi_a": est.psi_a,
        "psi_a_db": nopa.db(est.psi_a),
        "psi_b": est.psi_b,
        "psi_b_db": nopa.db(est.psi_b),
        "phi_minus": est.phi_minus,
        "phi_minus_db": nopa.db(est.phi_minus),
        "phi_0minus": est.phi_0minus,
        "phi_0minus_db": nopa.db(est.phi_0minus),
        "snr": est.snr,
        "snr_db": nopa.db(est.snr) if est.snr > 0 else float("-inf"),
        "snr_stderr": est.snr_stderr,
        "n_off": est.n_off,
        "n_on": est.n_on,
    }


def _chopped_trace(cfg: ScenarioConfig) -> ScenarioResult:
    msg, params = cfg.message, cfg.params
    tables, estimates = {}, {}
    for name, mode, seed in (("quantum", "quantum", cfg.seed), ("vacuum", "vacuum", proto.gs.derive_seed(cfg.seed, 1 << 32))):
        record = proto.run_frames(proto.build_source(params, mode), params, msg, (0.0, 0.0), seed)
        est = proto.estimate(record, msg.frame_pattern)
        tables[f"trace_{name}"] = (TRACE_COLUMNS, proto.frame_trace(record, msg.frame_pattern))
        estimates[name] = est
    q, v = estimates["quantum"], estimates["vacuum"]
    results = {
        "quantum": _estimate_dict(q),
        "vacuum": _estimate_dict(v),
        "snr_improvement_db": nopa.db(q.snr / v.snr),
        "analytic": {
            "receiver_snr": nopa.receiver_snr(params, msg.epsilon),
            "classical_snr": nopa.receiver_snr(params.with_(sigma=0.0, n_common=0.0), msg.epsilon),
            "v_minus_d": nopa.spectra(params).v_minus_d,
            "g_q_d": nopa.spectra(params).g_q_d,
        },
    }
    return ScenarioResult(results, tables)


def _tap_sweep(cfg: ScenarioConfig) -> ScenarioResult:
    eps = cfg.message.epsilon
    rows = []
    for rho in cfg.rho_grid:
        tr = adv.tap_tradeoff(cfg.params, eps, rho)
        rows.append(_with_db(asdict(tr), ("eve_snr", "bob_floor", "baseline_floor")))
    cols = tuple(rows[0]) if rows else ("rho", "eve_snr", "bob_floor", "baseline_floor")
    at_rho = adv.tap_tradeoff(cfg.params, eps, cfg.eve.rho)
    results: dict[str, Any] = {"eve_snr": at_rho.eve_snr, "bob_floor": at_rho.bob_floor, "rho": cfg.eve.rho}
    status = EXIT_OK
    try:
        best = adv.eve_min_rho(cfg.params, eps, cfg.snr_target)
        results["min_rho"] = asdict(best)
    except Infeasible as exc:
        results["min_rho"] = None
        results["infeasible"] = str(exc)
        status = EXIT_INFEASIBLE
    return ScenarioResult(results, {"tap_sweep": (cols, rows)}, status)


def _keyexchange(cfg: ScenarioConfig) -> ScenarioResult:
    n_frames = cfg.n_frames or cfg.n_samples
    rep = run_session(cfg.params, cfg.alphabet, n_frames, cfg.eve, cfg.seed, k_sigma=cfg.k_sigma)
    flags = rep.eve_flags
    results = {
        "n_frames": rep.n_frames,
        "n_sifted": rep.n_sifted,
        "sift_fraction": rep.sift_fraction,
        "ber": rep.ber,
        "measured_floor": rep.measured_floor,
        "measured_floor_db": nopa.db(rep.measured_floor),
        "orth_floor": rep.orth_floor,
        "orth_floor_db": nopa.db(rep.orth_floor),
        "expected_floor": rep.expected_floor,
        "floor_threshold": flags.floor_threshold,
        "orth_threshold": flags.orth_threshold,
        "flags": list(flags.flags),
    }
    rows = [
        {
            "frame_index": i,
            "alice_basis": BASES[int(a)],
            "alice_bit": int(bit),
            "bob_basis": BASES[int(b)],
            "outcome_mean": float(x),
            "kept": int(a == b),
        }
        for i, (a, bit, b, x) in enumerate(zip(rep.alice_basis, rep.alice_bit, rep.bob_basis, rep.outcome_mean))
    ]
    cols = ("frame_index", "alice_basis", "alice_bit", "bob_basis", "outcome_mean", "kept")
    return ScenarioResult(results, {"frames": (cols, rows)})


def _dense_coding(cfg: ScenarioConfig) -> ScenarioResult:
    res = asdict(proto.dense_coding_run(cfg.params, cfg.message, cfg.n_samples, cfg.seed))
    row = _with_db(res, ("floor_x", "floor_y"))
    return ScenarioResult(row, {"dense_coding": (tuple(row), [row])})


RUNNERS = {
    "spectra": _spectra,
    "transfer": _transfer,
    "fig2": _chopped_trace,
    "fig3": _chopped_trace,
    "tap_sweep": _tap_sweep,
    "keyexchange": _keyexchange,
    "dense_coding": _dense_coding,
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    return RUNNERS[cfg.scenario](cfg)


# -- output -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def summary_document(cfg: ScenarioConfig, results: dict, status: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "n_samples": cfg.n_samples,
        "status": status,
        "params": asdict(cfg.params),
        "message": {**asdict(cfg.message), "frame_pattern": list(cfg.message.frame_pattern)},
        "eve": asdict(cfg.eve),
        "results": _jsonable(results),
    }


def write_outputs(cfg: ScenarioConfig, result: ScenarioResult) -> list[Path]:
    out = cfg.out_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, (cols, rows) in result.tables.items():
            p = out / f"{name}.csv"
            p.write_text(csv_text(cols, rows), encoding="utf-8")
            written.append(p)
        p = out / "summary.json"
        doc = summary_document(cfg, result.results, result.status)
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(p)
    except OSError as exc:
        raise ConfigError(f"cannot write outputs to {out}: {exc}") from exc
    return written


def run(cfg: ScenarioConfig) -> int:
    result = run_scenario(cfg)
    write_outputs(cfg, result)
    return result.status


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float, bool)) or v is None:
            out[key] = v
    return out


def sweep(cfg: ScenarioConfig, axis: str, grid) -> tuple[tuple[str, ...], list[dict], int]:
    """Re-run the scenario once per grid value of ``axis``; one table row per point."""
    if axis not in AXES:
        raise ConfigError(f"axis {axis!r} is not a numeric parameter; choose from {AXES}")
    rows, status = [], EXIT_OK
    for value in grid:
        try:
            if axis in PARAM_AXES:
                point = replace(cfg, params=cfg.params.with_(**{axis: value}))
            elif axis in EVE_AXES:
                point = replace(cfg, eve=replace(cfg.eve, **{axis: value}))
            else:
                point = replace(cfg, message=replace(cfg.message, epsilon=value))
        except EprCommError as exc:
            raise ConfigError(f"{axis}={value}: {exc}") from exc
        res = run_scenario(point)
        status = max(status, res.status)
        rows.append({axis: float(value), "status": res.status, **_flatten(res.results)})
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    return tuple(cols) if cols else (axis, "status"), rows, status


# -- entry point --------------------------------------------------------------


def _parse_grid(text: str) -> list[float]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise ConfigError(f"grid must be comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprcomm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--samples", type=int, default=None, help="override n_samples")
        if name == "sweep":
            p.add_argument("--axis", required=True, help="numeric parameter to vary")
            p.add_argument("--grid", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, samples=args.samples, out=args.out)
        if args.command == "simulate":
            status = run(cfg)
            print(f"{cfg.scenario}: wrote results to {cfg.out_dir}")
            return status
        cols, rows, status = sweep(cfg, args.axis, _parse_grid(args.grid))
        try:
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            path = cfg.out_dir / "sweep.csv"
            path.write_text(csv_text(cols, rows), encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot write sweep table: {exc}") from exc
        print(f"sweep over {args.axis}: {len(rows)} rows written to {path}")
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
