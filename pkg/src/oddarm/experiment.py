"""Monte Carlo sweep orchestration, config parsing and result emission.

Configs are JSON documents with an arms section, an (L, delta) sweep
grid, a trial count and a base seed. Every trial owns a seed derived
from (base seed, point index, trial index), so results are byte-identical
no matter how trials are scheduled across workers. Adaptive and
known-parameters runs at the same sweep point share trial seeds, making
their comparison paired.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .env import ArmConfiguration, create_env, make_config
from .errors import OddArmError, ParseError, StepCapExceeded, ValidationError
from .hardness import dstar_delta, solve_dstar
from .markov import validate_transition_matrix
from .policy import ADAPTIVE, KNOWN_PARAMS, PolicyParams, run_to_stop

CSV_COLUMNS = [
    "mode", "L", "log_L", "delta", "trials", "mean_tau", "stderr_tau",
    "error_rate", "cap_hits", "d_star", "d_star_delta", "inv_d_star",
]

THREADS_ENV_VAR = "ODDARM_THREADS"

_MODES = {ADAPTIVE: (ADAPTIVE,), KNOWN_PARAMS: (KNOWN_PARAMS,), "both": (ADAPTIVE, KNOWN_PARAMS)}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    arms: ArmConfiguration
    l_values: tuple
    deltas: tuple
    trials: int
    seed: int
    mode: str = ADAPTIVE
    parallelism: int = 1
    output: str | None = None
    trial_records: str | None = None
    max_steps: int = 10_000_000
    resolve_every: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.parallelism < 1:
            raise ValidationError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.mode not in _MODES:
            raise ValidationError(f"mode must be one of {sorted(_MODES)}, got {self.mode!r}")
        for L in self.l_values:
            if L < 1.0:
                raise ValidationError(f"every L must be >= 1, got {L!r}")
        for d in self.deltas:
            if not 0.0 < d < 1.0:
                raise ValidationError(f"every delta must lie in the open interval (0, 1), got {d!r}")
        if not self.l_values or not self.deltas:
            raise ValidationError("sweep needs at least one L and one delta")

    def points(self):
        """Sweep points in canonical order with their point indices."""
        out = []
        idx = 0
        for L in self.l_values:
            for d in self.deltas:
                out.append((idx, float(L), float(d)))
                idx += 1
        return out

    def modes(self):
        return _MODES[self.mode]


@dataclass(frozen=True)
class SweepRow:
    mode: str
    L: float
    log_L: float
    delta: float
    trials: int
    mean_tau: float
    stderr_tau: float
    error_rate: float
    cap_hits: int
    d_star: float
    d_star_delta: float
    inv_d_star: float


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ParseError(f"missing field {where}.{key}" if where else f"missing field {key}")
    val = doc[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        name = kind.__name__ if not isinstance(kind, tuple) else "/".join(k.__name__ for k in kind)
        raise ParseError(f"field {where + '.' if where else ''}{key} must be {name}")
    return val


def parse_arms(doc: dict) -> ArmConfiguration:
    """Build the arm configuration from the ``arms`` section of a config."""
    K = _require(doc, "K", int, "arms")
    h = _require(doc, "h", int, "arms")
    raw1 = _require(doc, "P1", list, "arms")
    raw2 = _require(doc, "P2", list, "arms")
    nu = doc.get("nu")
    try:
        P1 = validate_transition_matrix(raw1)
        P2 = validate_transition_matrix(raw2)
        return make_config(K, h, P1, P2, initial=nu)
    except OddArmError as exc:
        raise ValidationError(f"arms: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level config must be a JSON object")
    arms = parse_arms(_require(doc, "arms", dict, ""))
    sweep = _require(doc, "sweep", dict, "")
    l_values = tuple(float(x) for x in _require(sweep, "L", list, "sweep"))
    deltas = tuple(float(x) for x in _require(sweep, "delta", list, "sweep"))
    trials = _require(doc, "trials", int, "")
    seed = _require(doc, "seed", int, "")
    kwargs = {}
    for key, kind in (("mode", str), ("parallelism", int), ("output", str),
                      ("trial_records", str), ("max_steps", int), ("resolve_every", int)):
        if key in doc:
            kwargs[key] = _require(doc, key, kind, "")
    return ExperimentConfig(arms=arms, l_values=l_values, deltas=deltas,
                            trials=trials, seed=seed, **kwargs)


# Reproduction preset for the simulation study: K=8, two-state chains,
# log-spaced L grid and the three exploration rates.
FIG1_PRESET = {
    "arms": {
        "K": 8,
        "h": 0,
        "P1": [[0.5, 0.5], [0.5, 0.5]],
        "P2": [[0.1, 0.9], [0.9, 0.1]],
    },
    "sweep": {
        "L": [10.0 ** (1.0 + 0.5 * k) for k in range(9)],
        "delta": [0.01, 0.1, 0.25],
    },
    "trials": 100,
    "seed": 1234,
    "mode": "both",
    "parallelism": 1,
}

PRESETS = {"fig1": FIG1_PRESET}


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return json.dumps(PRESETS[name])


def trial_seed(base_seed: int, point_index: int, trial_index: int) -> int:
    """64-bit trial seed derived from (base seed, point index, trial index)."""
    ss = np.random.SeedSequence((base_seed, point_index, trial_index))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class TrialRecord:
    mode: str
    point_index: int
    L: float
    delta: float
    trial_index: int
    seed: int
    tau: int
    correct: bool
    capped: bool


def _run_one_trial(arms, mode, L, delta, seed, max_steps, resolve_every):
    env = create_env(arms, seed)
    params = PolicyParams(threshold_L=L, delta=delta, max_steps=max_steps,
                          resolve_every=resolve_every)
    try:
        result = run_to_stop(env, params, mode)
        return result.stopping_time, result.correct, False
    except StepCapExceeded as exc:
        return exc.steps, False, True


def _run_chunk(task):
    config, mode, point_index, L, delta, trial_indices = task
    records = []
    for t in trial_indices:
        seed = trial_seed(config.seed, point_index, t)
        tau, correct, capped = _run_one_trial(
            config.arms, mode, L, delta, seed, config.max_steps, config.resolve_every
        )
        records.append(TrialRecord(mode, point_index, L, delta, t, seed, tau, correct, capped))
    return records


def effective_parallelism(config: ExperimentConfig) -> int:
    override = os.environ.get(THREADS_ENV_VAR)
    if override:
        try:
            value = int(override)
        except ValueError as exc:
            raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {override!r}") from exc
        if value < 1:
            raise ValidationError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
        return value
    return config.parallelism


def run_trials(config: ExperimentConfig) -> list[TrialRecord]:
    """All per-trial records of the sweep, in canonical (mode, point, trial) order."""
    workers = effective_parallelism(config)
    tasks = []
    for mode in config.modes():
        for point_index, L, delta in config.points():
            trial_ids = list(range(config.trials))
            chunk = max(1, math.ceil(config.trials / max(workers * 4, 1)))
            for lo in range(0, config.trials, chunk):
                tasks.append((config, mode, point_index, L, delta, trial_ids[lo:lo + chunk]))
    if workers <= 1 or len(tasks) <= 1:
        chunks = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chunk, tasks, chunksize=1))
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (config.modes().index(r.mode), r.point_index, r.trial_index))
    return records


def aggregate(config: ExperimentConfig, records: list[TrialRecord]) -> list[SweepRow]:
    """Fold per-trial records into one row per (mode, point).

    Capped trials are excluded from the stopping-time and error-rate
    statistics and reported through the cap_hits column instead.
    """
    sol = solve_dstar(config.arms.odd_matrix, config.arms.common_matrix, config.arms.num_arms)
    d_delta = {
        d: dstar_delta(config.arms.odd_matrix, config.arms.common_matrix, config.arms.num_arms, d)
        for d in config.deltas
    }
    by_key = {}
    for rec in records:
        by_key.setdefault((rec.mode, rec.point_index), []).append(rec)
    rows = []
    for mode in config.modes():
        for point_index, L, delta in config.points():
            recs = by_key.get((mode, point_index), [])
            done = [r for r in recs if not r.capped]
            taus = np.array([r.tau for r in done], dtype=float)
            mean_tau = float(taus.mean()) if taus.size else math.nan
            stderr = float(taus.std(ddof=1) / math.sqrt(taus.size)) if taus.size > 1 else 0.0
            errors = sum(1 for r in done if not r.correct)
            error_rate = errors / len(done) if done else math.nan
            rows.append(SweepRow(
                mode=mode, L=L, log_L=math.log(L), delta=delta, trials=len(recs),
                mean_tau=mean_tau, stderr_tau=stderr, error_rate=error_rate,
                cap_hits=sum(1 for r in recs if r.capped),
                d_star=sol.d_star, d_star_delta=d_delta[delta],
                inv_d_star=1.0 / sol.d_star,
            ))
    return rows


def write_trial_records(records: list[TrialRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "point_index", "L", "delta", "trial_index",
                         "seed", "tau", "correct", "capped"])
        for r in records:
            writer.writerow([r.mode, r.point_index, _fmt(r.L), _fmt(r.delta),
                             r.trial_index, r.seed, r.tau, int(r.correct), int(r.capped)])


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    """Run all trials of the sweep and aggregate them into rows."""
    records = run_trials(config)
    if config.trial_records:
        write_trial_records(records, config.trial_records)
    return aggregate(config, records)


def _fmt(x) -> str:
    # floats carry 9 significant digits in emitted tables
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def _row_values(row: SweepRow):
    return [row.mode, _fmt(row.L), _fmt(row.log_L), _fmt(row.delta), str(row.trials),
            _fmt(row.mean_tau), _fmt(row.stderr_tau), _fmt(row.error_rate),
            str(row.cap_hits), _fmt(row.d_star), _fmt(row.d_star_delta), _fmt(row.inv_d_star)]


def render_results(rows: list[SweepRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValidationError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(_row_values(row))
        return buf.getvalue()
    if fmt == "json":
        objs = []
        for row in rows:
            obj = {}
            for col, val in zip(CSV_COLUMNS, _row_values(row)):
                if col == "mode":
                    obj[col] = val
                elif col in ("trials", "cap_hits"):
                    obj[col] = int(val)
                else:
                    obj[col] = float(val)
            objs.append(obj)
        return json.dumps(objs, indent=2) + "\n"
    raise ValidationError(f"unknown output format {fmt!r}")


def emit_results(rows: list[SweepRow], fmt: str, path: str) -> None:
    """Write the aggregated table; CSV column order is fixed."""
    text = render_results(rows, fmt)
    with open(path, "w") as fh:
        fh.write(text)


def parse_results_csv(text: str) -> list[SweepRow]:
    """Read back a table produced by render_results (round-trip helper)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ParseError(f"unexpected CSV header {header!r}")
    rows = []
    for vals in reader:
        rec = dict(zip(CSV_COLUMNS, vals))
        rows.append(SweepRow(
            mode=rec["mode"], L=float(rec["L"]), log_L=float(rec["log_L"]),
            delta=float(rec["delta"]), trials=int(rec["trials"]),
            mean_tau=float(rec["mean_tau"]), stderr_tau=float(rec["stderr_tau"]),
            error_rate=float(rec["error_rate"]), cap_hits=int(rec["cap_hits"]),
            d_star=float(rec["d_star"]), d_star_delta=float(rec["d_star_delta"]),
            inv_d_star=float(rec["inv_d_star"]),
        ))
    return rows


def bound_report(P1_raw, P2_raw, K: int, deltas=()) -> str:
    """Printable hardness report: D*, lambda*, 1/D* and D*_delta per delta."""
    try:
        P1 = validate_transition_matrix(P1_raw)
        P2 = validate_transition_matrix(P2_raw)
    except OddArmError as exc:
        raise ValidationError(str(exc)) from exc
    if np.max(np.abs(P1.rows - P2.rows)) <= 1e-12:
        raise ValidationError("P1 equals P2; the odd arm would be indistinguishable")
    if K < 3:
        raise ValidationError(f"need at least 3 arms, got K={K}")
    sol = solve_dstar(P1, P2, K)
    lines = [
        f"D*       = {_fmt(sol.d_star)}",
        f"lambda*  = {_fmt(sol.lambda_star)}",
        f"1/D*     = {_fmt(1.0 / sol.d_star)}",
    ]
    for d in deltas:
        val = dstar_delta(P1, P2, K, float(d))
        lines.append(f"D*_delta(delta={_fmt(float(d))}) = {_fmt(val)}")
    return "\n".join(lines) + "\n"
