"""Experiment orchestration: single runs, seed sweeps and CSV output.

A run alternates three steps for ``T`` iterations: the policy chooses ``u_t``,
the environment returns ``x_{t+1}``, the learner updates ``theta``. Runs are
described by ``RunConfig`` objects, usually parsed from INI files.
"""
from __future__ import annotations

import ast
import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environments import SimulationDiverged, make_env
from .gram import DEFAULT_EPS, GramState
from .learning import OnlineGradientDescent, RecursiveLeastSquares, make_target
from .models import build_model, save_params
from .policies import PolicyConfig, make_policy

log = logging.getLogger(__name__)

LEARNERS = ("rls", "ogd")


@dataclass
class RunConfig:
    env: str = "pendulum"
    model: str = "pendulum_linear"
    policy: str = "flex"
    learner: str = "rls"
    T: int = 100
    seed: int = 0
    eval_stride: int = 10
    eps_reg: float = DEFAULT_EPS
    theta_init: str = "default"      # "default" or "true"
    record_timing: bool = True
    checkpoint_stride: int = 0
    env_options: dict = field(default_factory=dict)
    model_options: dict = field(default_factory=dict)
    policy_options: dict = field(default_factory=dict)
    learner_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.eval_stride < 1:
            raise ValueError("eval_stride must be at least 1")
        if self.learner not in LEARNERS:
            raise ValueError(f"learner must be one of {LEARNERS}, got {self.learner!r}")
        if self.theta_init not in ("default", "true"):
            raise ValueError("theta_init must be 'default' or 'true'")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def config_hash(self) -> str:
        """Stable digest of everything except the seed."""
        payload = dataclasses.asdict(self)
        payload.pop("seed")
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- config files -------------------------------------------------------------

def _parse_value(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _parse_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [s.strip() for s in str(value).split(",") if s.strip()]


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str         # keys such as T and N are case-sensitive
    return parser


def read_config(path) -> tuple[RunConfig, dict]:
    """Parse an INI file into a ``RunConfig`` plus the raw ``[experiment]`` section.

    Sections: ``[run]`` holds ``RunConfig`` scalars; ``[env]``, ``[model]``,
    ``[policy]`` and ``[learner]`` hold component options.
    """
    parser = _parser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    return parse_config(parser)


def parse_config(parser: configparser.ConfigParser) -> tuple[RunConfig, dict]:
    names = {f.name for f in dataclasses.fields(RunConfig)}
    run = {}
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key not in names:
                raise ValueError(f"unknown [run] key {key!r}")
            value = _parse_value(raw)
            run[key] = str(value) if key in ("env", "model", "policy", "learner") else value

    def section(name):
        if not parser.has_section(name):
            return {}
        return {k: _parse_value(v) for k, v in parser.items(name)}

    cfg = RunConfig(**run, env_options=section("env"), model_options=section("model"),
                    policy_options=section("policy"), learner_options=section("learner"))
    return cfg, section("experiment")


def config_from_string(text: str) -> tuple[RunConfig, dict]:
    parser = _parser()
    parser.read_string(text)
    return parse_config(parser)


# -- single runs ----------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-step records for ``t = 1..T``: the state and input that produced
    ``x_t``, and errors of ``theta_t`` (``nan`` between evaluation strides)."""

    config: RunConfig
    d: int
    m: int
    states: np.ndarray
    inputs: np.ndarray
    eps: np.ndarray
    perr: np.ndarray
    policy_ns: np.ndarray
    learn_ns: np.ndarray
    theta: np.ndarray
    theta_path: np.ndarray
    star_distance: np.ndarray
    failed: bool = False
    message: str = ""
    config_hash: str = ""

    def __len__(self):
        return len(self.states)

    @property
    def final_eps(self) -> float:
        valid = self.eps[~np.isnan(self.eps)]
        return float(valid[-1]) if valid.size else float("nan")

    @property
    def final_perr(self) -> float:
        valid = self.perr[~np.isnan(self.perr)]
        return float(valid[-1]) if valid.size else float("nan")


def evaluate(model, theta, env, grid=None, t=0) -> float:
    """Root-mean-square of ``|f(z, theta) - f_true(z)|`` over the evaluation grid."""
    x, u = env.eval_grid() if grid is None else grid
    if len(x) == 0:
        raise ValueError("evaluation grid is empty")
    diff = model.predict(x, u, theta) - env.drift(x, u, t)
    return float(np.sqrt(np.mean(np.sum(diff**2, axis=-1))))


def evaluate_params(theta, theta_star) -> float:
    theta = np.asarray(theta, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if theta.shape != theta_star.shape:
        raise ValueError(f"shape mismatch {theta.shape} vs {theta_star.shape}")
    return float(np.linalg.norm(theta - theta_star))


def _has_true_params(env, model) -> bool:
    ts = env.true_params(0)
    return ts is not None and np.shape(ts) == (model.n,)


def build_components(cfg: RunConfig):
    env = make_env(cfg.env, **cfg.env_options)
    model = build_model(cfg.model, env, **cfg.model_options)
    return env, model


def run_exploration(cfg: RunConfig, out_dir=None) -> RunTrace:
    """Execute ``cfg.T`` choose/observe/update iterations; deterministic given the seed."""
    env, model = build_components(cfg)
    noise_ss, policy_ss, init_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    noise_rng = np.random.default_rng(noise_ss)
    policy_rng = np.random.default_rng(policy_ss)
    init_rng = np.random.default_rng(init_ss)

    popts = dict(cfg.policy_options)
    popts.setdefault("gamma", env.gamma)
    pcfg = PolicyConfig(seed=cfg.seed, **popts)
    if pcfg.gamma > env.gamma:
        raise ValueError(f"policy gamma {pcfg.gamma} exceeds the environment bound {env.gamma}")
    policy = make_policy(cfg.policy, model, pcfg, env.dt, rng=policy_rng)

    known = _has_true_params(env, model)
    if cfg.theta_init == "true":
        if not known:
            raise ValueError(f"model {cfg.model!r} has no true parameters in env {cfg.env!r}")
        theta0 = env.true_params(0)
    elif cfg.learner == "rls":
        theta0 = np.zeros(model.n)
    else:
        theta0 = model.init_params(init_rng)

    gram = GramState(model.n, cfg.eps_reg)
    if cfg.learner == "rls":
        learner = RecursiveLeastSquares(model, gram=gram, theta0=theta0)
    else:
        learner = OnlineGradientDescent(model, theta0, **cfg.learner_options)
    theta = learner.theta.copy()
    grid = env.eval_grid()

    T = cfg.T
    states = np.full((T, model.d), np.nan)
    inputs = np.full((T, model.m), np.nan)
    eps = np.full(T, np.nan)
    perr = np.full(T, np.nan)
    star_distance = np.full(T, np.nan)
    policy_ns = np.zeros(T, dtype=np.int64)
    learn_ns = np.zeros(T, dtype=np.int64)
    theta_path = np.full((T + 1, model.n), np.nan)
    theta_path[0] = theta
    failed, message = False, ""
    chash = cfg.config_hash()
    ckpt_dir = Path(out_dir) / f"theta_seed{cfg.seed}" if (out_dir and cfg.checkpoint_stride) else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    x = env.initial_state()
    history = [x.copy()]
    steps = 0
    for t in range(T):
        t0 = time.perf_counter_ns()
        u = np.asarray(policy.act(t, x, theta, gram, np.array(history)), dtype=float)
        t1 = time.perf_counter_ns()
        try:
            x_next = env.step(x, u, t, noise_rng)
        except SimulationDiverged as exc:
            failed, message = True, str(exc)
            log.error("run %s seed %d diverged: %s", chash, cfg.seed, exc)
            break
        target = make_target(x, u, x_next, env.dt)
        t2 = time.perf_counter_ns()
        if cfg.learner == "ogd":
            gram.block_update(model.features(x, u, theta))
        learner.update(target)
        t3 = time.perf_counter_ns()
        theta = learner.theta.copy()
        if not np.all(np.isfinite(theta)):
            failed, message = True, f"non-finite parameters at t={t + 1}"
            break

        states[t], inputs[t] = x, u
        theta_path[t + 1] = theta
        if cfg.record_timing:
            policy_ns[t], learn_ns[t] = t1 - t0, t3 - t2
        step = t + 1
        if step % cfg.eval_stride == 0 or step == T:
            eps[t] = evaluate(model, theta, env, grid, step)
            if known:
                perr[t] = evaluate_params(theta, env.true_params(step))
        if hasattr(env, "star_center"):
            star_distance[t] = float(np.linalg.norm(x_next[[0, 2]] - env.star_center(step)))
        if ckpt_dir is not None and step % cfg.checkpoint_stride == 0:
            save_params(ckpt_dir / f"theta_{step:06d}.txt", model, theta)
        x = x_next
        history.append(x.copy())
        steps = step

    if steps < T:
        failed = True
    return RunTrace(cfg, model.d, model.m, states, inputs, eps, perr, policy_ns, learn_ns,
                    theta, theta_path, star_distance, failed, message, chash)


# -- CSV output -----------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "" if np.isnan(value) else repr(value)


def trace_rows(trace: RunTrace):
    header = (["t"] + [f"x{i}" for i in range(trace.d)] + [f"u{i}" for i in range(trace.m)]
              + ["eps", "perr", "policy_ns", "learn_ns", "config_hash"])
    rows = []
    for t in range(len(trace)):
        if np.isnan(trace.states[t, 0]):
            break
        rows.append([str(t + 1)] + [_fmt(v) for v in trace.states[t]]
                    + [_fmt(v) for v in trace.inputs[t]]
                    + [_fmt(trace.eps[t]), _fmt(trace.perr[t]),
                       _fmt(trace.policy_ns[t]), _fmt(trace.learn_ns[t]), trace.config_hash])
    return header, rows


def write_trace(trace: RunTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header, rows = trace_rows(trace)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_trace_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


# -- multi-seed experiments ----------------------------------------------------------

def run_many(cfgs, workers: int = 1) -> list[RunTrace]:
    """Run configurations serially or in a process pool; order is preserved."""
    cfgs = list(cfgs)
    if workers <= 1 or len(cfgs) <= 1:
        return [run_exploration(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_exploration, cfgs))


AGGREGATE_HEADER = ["env", "policy", "t", "mean", "median", "q25", "q75",
                    "n_seeds", "n_failed", "config_hash"]


def aggregate(traces, metric: str = "eps") -> list[list]:
    """One row per ``(env, policy, t)`` over successful seeds of each cell.

    Cells are keyed by ``(env, policy)``; every trace in a cell must share one
    config hash.
    """
    cells: dict = {}
    for tr in traces:
        cells.setdefault((tr.config.env, tr.config.policy), []).append(tr)
    rows = []
    for (env, policy), group in cells.items():
        hashes = {tr.config_hash for tr in group}
        if len(hashes) != 1:
            raise ValueError(f"mixed config hashes in cell ({env}, {policy}): {sorted(hashes)}")
        chash = next(iter(hashes))
        ok = [tr for tr in group if not tr.failed]
        n_failed = len(group) - len(ok)
        if not ok:
            continue
        values = np.array([getattr(tr, metric) for tr in ok])         # (seeds, T)
        steps = np.flatnonzero(~np.all(np.isnan(values), axis=0))
        for idx in steps:
            col = values[:, idx]
            col = col[~np.isnan(col)]
            q25, med, q75 = np.percentile(col, [25, 50, 75])
            rows.append([env, policy, idx + 1, float(np.mean(col)), float(med), float(q25),
                         float(q75), len(col), n_failed, chash])
    return rows


def seed_configs(cfg: RunConfig, policies, seeds: int, first_seed: int = 0):
    return [cfg.replace(policy=p, seed=first_seed + s) for p in policies for s in range(seeds)]


def benchmark(cfg: RunConfig, policies, n_seeds: int, out_dir=None, workers: int = 1,
              metric: str = "eps"):
    """Run every policy over ``n_seeds`` seeds; return traces and aggregate rows."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    traces = run_many(seed_configs(cfg, policies, n_seeds), workers)
    rows = aggregate(traces, metric)
    if out_dir is not None:
        out = Path(out_dir)
        for tr in traces:
            write_trace(tr, out / "raw" / f"{tr.config.env}_{tr.config.policy}_seed{tr.config.seed}.csv")
        write_rows(out / "aggregate.csv", AGGREGATE_HEADER, [[_cell(v) for v in r] for r in rows])
    return traces, rows


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def final_values(traces, metric: str = "eps") -> dict:
    """Per-policy list of final metric values over successful seeds."""
    out: dict = {}
    for tr in traces:
        if tr.failed:
            continue
        out.setdefault(tr.config.policy, []).append(getattr(tr, f"final_{metric}"))
    return out


# -- chain scaling -----------------------------------------------------------------

def sample_complexity(trace: RunTrace, threshold: float) -> float:
    """First ``t`` (counting ``theta_0``) with ``|theta_t - theta_true| <= threshold``; ``inf`` if never."""
    env, _ = build_components(trace.config)
    theta_star = env.true_params(0)
    errors = np.linalg.norm(trace.theta_path - theta_star, axis=1)
    hits = np.flatnonzero(errors <= threshold)
    return float(hits[0]) if hits.size else float("inf")


CHAIN_HEADER = ["N", "policy", "median_samples", "n_seeds", "n_failed", "mean_policy_ns",
                "config_hash"]


def chain_config(N: int, base: RunConfig | None = None, cap: int = 500) -> RunConfig:
    base = base or RunConfig(env="chain", model="chain_linear", learner="rls", eval_stride=cap)
    opts = dict(base.env_options)
    opts["N"] = N
    return base.replace(env="chain", model="chain_linear", learner="rls", T=cap, env_options=opts)


def chain_experiment(Ns, threshold: float = 1e-2, cap: int = 500, n_seeds: int = 20,
                     policies=("flex", "random"), base: RunConfig | None = None,
                     workers: int = 1, out_dir=None):
    """Median samples to reach ``threshold`` parameter error, per ``(N, policy)``."""
    if not Ns:
        raise ValueError("Ns must be non-empty")
    table = []
    for N in Ns:
        cfg = chain_config(int(N), base, cap)
        traces = run_many(seed_configs(cfg, policies, n_seeds), workers)
        for policy in policies:
            group = [tr for tr in traces if tr.config.policy == policy]
            ok = [tr for tr in group if not tr.failed]
            samples = np.array([sample_complexity(tr, threshold) for tr in ok])
            median = float(np.median(samples)) if samples.size else float("inf")
            ns = np.concatenate([tr.policy_ns for tr in ok]) if ok else np.zeros(1)
            table.append({"N": int(N), "policy": policy, "median_samples": median,
                          "samples": samples, "n_seeds": len(ok),
                          "n_failed": len(group) - len(ok),
                          "mean_policy_ns": float(np.mean(ns)),
                          "config_hash": group[0].config_hash, "traces": group})
    if out_dir is not None:
        rows = [[r["N"], r["policy"],
                 f">{cap}" if np.isinf(r["median_samples"]) else _cell(r["median_samples"]),
                 r["n_seeds"], r["n_failed"], _cell(r["mean_policy_ns"]), r["config_hash"]]
                for r in table]
        write_rows(Path(out_dir) / "chain.csv", CHAIN_HEADER, rows)
    return table


# -- time-varying star field -----------------------------------------------------------

STAR_HEADER = ["policy", "final_perr_median", "final_perr_q25", "final_perr_q75",
               "mean_star_distance", "mean_policy_ns", "n_seeds", "n_failed", "config_hash"]


def star_experiment(cfg: RunConfig, policies=("flex", "random", "episodic"), n_seeds: int = 20,
                    out_dir=None, workers: int = 1):
    """Parameter-error curves against the moving star; returns traces and a summary."""
    traces, rows = benchmark(cfg, policies, n_seeds, out_dir=None, workers=workers, metric="perr")
    summary = []
    for policy in policies:
        group = [tr for tr in traces if tr.config.policy == policy]
        ok = [tr for tr in group if not tr.failed]
        finals = np.array([tr.final_perr for tr in ok])
        q25, med, q75 = np.percentile(finals, [25, 50, 75]) if finals.size else (np.nan,) * 3
        dist = float(np.mean([np.nanmean(tr.star_distance) for tr in ok])) if ok else np.nan
        ns = float(np.mean(np.concatenate([tr.policy_ns for tr in ok]))) if ok else np.nan
        summary.append({"policy": policy, "final_perr_median": float(med),
                        "final_perr_q25": float(q25), "final_perr_q75": float(q75),
                        "mean_star_distance": dist, "mean_policy_ns": ns,
                        "n_seeds": len(ok), "n_failed": len(group) - len(ok),
                        "config_hash": group[0].config_hash})
    if out_dir is not None:
        out = Path(out_dir)
        write_rows(out / "star_curves.csv", AGGREGATE_HEADER, [[_cell(v) for v in r] for r in rows])
        write_rows(out / "star_summary.csv", STAR_HEADER,
                   [[_cell(s[k]) for k in STAR_HEADER] for s in summary])
        for tr in traces:
            write_trace(tr, out / "raw" / f"star_{tr.config.policy}_seed{tr.config.seed}.csv")
    return traces, summary


def input_periodogram(trace: RunTrace, path=None):
    """Spectral density of each input channel; optionally written as CSV."""
    from scipy.signal import periodogram

    dt = make_env(trace.config.env, **trace.config.env_options).dt
    u = trace.inputs[~np.isnan(trace.inputs[:, 0])]
    freqs, power = periodogram(u, fs=1.0 / dt, axis=0)
    if path is not None:
        header = ["frequency"] + [f"power_u{i}" for i in range(power.shape[1])]
        write_rows(path, header, [[repr(float(f))] + [repr(float(p)) for p in row]
                                  for f, row in zip(freqs, power)])
    return freqs, power
