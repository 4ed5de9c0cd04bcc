"""Experiment runner behind the command line.

A validated config expands into a list of independent jobs (one per
direction, seed, ...). Jobs run in order, optionally in a process pool, and
their rows are flushed to CSV every ``checkpoint_every`` jobs so an
interrupted run leaves usable partial output.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .builtins import SURFACES, TEST_FUNCTIONS, builtin_surface
from .config import SURFACE_FREE
from .errors import ConfigError, FlatLabError
from .genericity import (EXPERIMENT_COLUMNS, birkhoff_curve, correlation_decay, stratified_thetas,
                         write_plot_json)
from .lyapunov import lyapunov_spectrum
from .random_walk import WALK_COLUMNS, WalkMeasure, stationarity_curve, sublinear_tracking, walk
from .surface import TranslationSurface, load_surface
from .windtree import WINDTREE_COLUMNS, WindTreeConfig, diffusion_exponent, geometric_checkpoints

ROTH_COLUMNS = ["surface_id", "theta", "i", "r", "t_i", "ratio"]


def resolve_surface(ref: str) -> TranslationSurface:
    """A builtin name or a path to a surface file."""
    if ref in SURFACES:
        return builtin_surface(ref)
    if os.path.exists(ref):
        S = load_surface(ref)
        if not S.name:
            S.name = Path(ref).stem
        return S
    raise KeyError(f"{ref!r} is neither a builtin surface ({sorted(SURFACES)}) nor a file")


def make_phi(spec: dict):
    spec = dict(spec)
    name = spec.pop("name")
    return TEST_FUNCTIONS[name](**spec)


def make_measure(spec: Optional[dict]) -> WalkMeasure:
    if spec is None:
        return WalkMeasure.default()
    return WalkMeasure(tuple(spec["knots"]), tuple(spec["values"]))


def build_id() -> str:
    """sha1 over the package sources, so outputs name the code that made them."""
    h = hashlib.sha1()
    root = Path(__file__).parent
    for p in sorted(root.glob("*.py")) + sorted(root.glob("*.pyx")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def _thetas(params: dict, seed: int) -> List[float]:
    if "thetas" in params:
        return [float(t) for t in params["thetas"]]
    return [float(t) for t in np.random.default_rng(seed).uniform(0, 2 * math.pi, params["n_theta"])]


def _seeds(params: dict, seed: int) -> List[int]:
    if "seeds" in params:
        return [int(s) for s in params["seeds"]]
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(params["n_seeds"])]


# ------------------------------------------------------------------ jobs
# Job functions are module level so a process pool can pickle them.

def _job_lyapunov(job: dict) -> List[dict]:
    S = resolve_surface(job["surface"])
    theta, T, dt = job["theta"], job["T"], job["dt"]
    if job["backend"] == "delaunay":
        from .flow import delaunay_stream
        stream = delaunay_stream(S, theta, T, dt, label=S.name or "")
    else:
        from .iet import rauzy_stream
        stream = rauzy_stream(S, theta, T, label=S.name or "")
    est = lyapunov_spectrum(stream, n_windows=job["n_windows"])
    row = {"surface_id": S.name or "", "theta": theta, "T": float(est.t_final), "backend": est.backend}
    for i, v in enumerate(est.exponents, 1):
        row[f"lambda_{i}"] = float(v)
    for i, v in enumerate(est.stderr, 1):
        row[f"stderr_{i}"] = float(v)
    return [row]


def _job_birkhoff(job: dict) -> List[dict]:
    S = resolve_surface(job["surface"])
    phi = make_phi(job["phi"])
    recs = birkhoff_curve(S, job["theta"], phi, job["Ts"], job["dt"])
    return [{"experiment": "birkhoff", "surface_id": S.name or "", "phi": phi.name, "theta": r.theta,
             "T": r.T, "value": r.value} for r in recs]


def _job_walk(job: dict) -> List[dict]:
    measure = make_measure(job.get("measure"))
    S = resolve_surface(job["surface"]) if job.get("surface") else None
    traj = walk(measure, S, job["n_steps"], job["seed"])
    cps = sorted(job["checkpoints"])
    defects = [None] * len(cps)
    if S is not None:
        phi = make_phi(job["phi"])
        defects = [float(d) for d in stationarity_curve(traj, phi, cps, job["n_mc"])]
    tr = sublinear_tracking(traj, cps)
    return [{"seed": job["seed"], "n": int(n), "lambda_hat": tr.lambda_hat, "theta_bar": tr.theta_bar,
             "e_n": float(e), "stationarity_defect": d}
            for n, e, d in zip(tr.checkpoints, tr.errors, defects)]


def _job_windtree(job: dict) -> List[dict]:
    cfg = WindTreeConfig(job["a"], job["b"])
    p = job.get("start") or cfg.free_point()
    cps = geometric_checkpoints(job["t_min"], job["t_max"], job["per_decade"])
    res = diffusion_exponent(cfg, p, [job["theta"]], cps, job["fit_from"], seed=job["seed"])
    theta = float(res.thetas[0])
    return [{"a": cfg.a, "b": cfg.b, "theta": theta, "T": float(t), "displacement": float(d),
             "running_max": float(m), "collisions": int(c), "_slope": float(res.slopes[0])}
            for t, d, m, c in res.tables[0]]


def _job_roth(job: dict) -> List[dict]:
    from .roth import roth_condition_a, roth_times
    S = resolve_surface(job["surface"])
    times = roth_times(S, job["theta"], job["i_max"], job["dt"], job["horizon"])
    return [{"surface_id": S.name or "", "theta": job["theta"], "i": i, "r": 1,
             "t_i": times.times[i - 1], "ratio": q} for i, q in roth_condition_a(times).items()]


def _job_correlation(job: dict) -> List[dict]:
    S = resolve_surface(job["surface"])
    phi = make_phi(job["phi"])
    res = correlation_decay(S, phi, job["alpha"], job["ts"], job["n_theta"], job["seed"],
                            job["min_gap"], job["max_gap"], job["dt"])
    rows = [{"experiment": "correlation", "surface_id": S.name or "", "phi": phi.name, "alpha": job["alpha"],
             "s": s, "t": t, "value": c} for s, t, c, _ in res.pairs]
    rows += [{"experiment": "zero_mean", "surface_id": S.name or "", "phi": phi.name, "alpha": job["alpha"],
              "t": t, "value": m, "_quad_error": q} for t, m, q in res.zero_mean]
    rows.append({"experiment": "envelope", "surface_id": S.name or "", "phi": phi.name, "alpha": job["alpha"],
                 "value": res.rate, "_C": res.C})
    return rows


JOB_FUNCTIONS: Dict[str, Callable[[dict], List[dict]]] = {
    "lyapunov": _job_lyapunov, "birkhoff": _job_birkhoff, "walk": _job_walk, "tracking": _job_walk,
    "windtree": _job_windtree, "roth": _job_roth, "correlation": _job_correlation,
}


def expand_jobs(config: dict) -> List[dict]:
    kind, p, seed = config["experiment"], config["params"], config["seed"]
    surface = config.get("surface")
    if kind == "lyapunov":
        return [{"surface": surface, "theta": th, "T": p["T"], "dt": p["dt"], "backend": b,
                 "n_windows": p["n_windows"]} for th in _thetas(p, seed) for b in p["backends"]]
    if kind == "birkhoff":
        return [{"surface": surface, "theta": th, "Ts": p["Ts"], "dt": p["dt"], "phi": p["phi"]}
                for th in _thetas(p, seed)]
    if kind in ("walk", "tracking"):
        return [{"surface": surface if kind == "walk" else None, "seed": s, "n_steps": p["n_steps"],
                 "n_mc": p.get("n_mc", 1), "checkpoints": p["checkpoints"], "phi": p.get("phi"),
                 "measure": p.get("measure")} for s in _seeds(p, seed)]
    if kind == "windtree":
        if "thetas" in p:
            thetas = [float(t) for t in p["thetas"]]
        else:
            thetas = [float(t) for t in stratified_thetas(p["n_theta"], np.random.default_rng(seed))]
        subs = np.random.SeedSequence(seed).generate_state(len(thetas))
        return [{"a": p["a"], "b": p["b"], "theta": th, "t_min": p["t_min"], "t_max": p["t_max"],
                 "per_decade": p["per_decade"], "fit_from": p["fit_from"], "start": p.get("start"),
                 "seed": int(s)} for th, s in zip(thetas, subs)]
    if kind == "roth":
        return [{"surface": surface, "theta": th, "i_max": p["i_max"], "dt": p["dt"], "horizon": p["horizon"]}
                for th in _thetas(p, seed)]
    if kind == "correlation":
        return [dict(p, surface=surface, seed=seed)]
    raise KeyError(kind)


# --------------------------------------------------------------- output

def columns_for(kind: str, rows: Sequence[dict]) -> List[str]:
    if kind == "lyapunov":
        dim = max((int(k.split("_")[1]) for r in rows for k in r if k.startswith("lambda_")), default=0)
        return (["surface_id", "theta", "T"] + [f"lambda_{i}" for i in range(1, dim + 1)]
                + [f"stderr_{i}" for i in range(1, dim + 1)] + ["backend"])
    if kind in ("walk", "tracking"):
        return list(WALK_COLUMNS)
    if kind == "windtree":
        return list(WINDTREE_COLUMNS)
    if kind == "roth":
        return list(ROTH_COLUMNS)
    return list(EXPERIMENT_COLUMNS)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_rows(path: Path, kind: str, rows: Sequence[dict]) -> None:
    """Write atomically: a partial file never replaces a good one half-written."""
    cols = columns_for(kind, rows)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])
    os.replace(tmp, path)


def summarize(kind: str, rows: Sequence[dict]) -> dict:
    """Small aggregate written into the envelope and printed by the CLI."""
    if not rows:
        return {}
    if kind == "lyapunov":
        out = {}
        for b in sorted({r["backend"] for r in rows}):
            sel = [r for r in rows if r["backend"] == b]
            dim = len([k for k in sel[0] if k.startswith("lambda_")])
            out[b] = [float(np.mean([r[f"lambda_{i}"] for r in sel])) for i in range(1, dim + 1)]
        return {"mean_exponents": out}
    if kind == "birkhoff":
        out = {}
        for T in sorted({r["T"] for r in rows}):
            v = np.array([r["value"] for r in rows if r["T"] == T])
            m = float(np.mean(v))
            out[repr(T)] = {"mean": m, "spread": float(np.ptp(v) / m) if m else 0.0, "n": int(len(v))}
        return {"by_T": out}
    if kind in ("walk", "tracking"):
        last = max(r["n"] for r in rows)
        first = min(r["n"] for r in rows)
        fin = [r for r in rows if r["n"] == last]
        out = {"seeds": len(fin), "mean_lambda_hat": float(np.mean([r["lambda_hat"] for r in fin])),
               "mean_e_final": float(np.mean([r["e_n"] for r in fin]))}
        by_seed: Dict[int, Dict[int, dict]] = {}
        for r in rows:
            by_seed.setdefault(r["seed"], {})[r["n"]] = r
        out["e_decreased_fraction"] = float(np.mean([d[last]["e_n"] < d[first]["e_n"] for d in by_seed.values()]))
        if rows[0].get("stationarity_defect") is not None:
            out["defect_decreased_fraction"] = float(np.mean(
                [d[last]["stationarity_defect"] < d[first]["stationarity_defect"] for d in by_seed.values()]))
        return out
    if kind == "windtree":
        slopes = {}
        for r in rows:
            slopes[r["theta"]] = r["_slope"]
        s = np.array(list(slopes.values()))
        return {"slope": float(np.mean(s)), "slope_sd": float(np.std(s, ddof=1)) if len(s) > 1 else 0.0,
                "directions": int(len(s))}
    if kind == "roth":
        worst = {}
        for r in rows:
            worst[r["theta"]] = max(worst.get(r["theta"], 0.0), r["ratio"])
        return {"max_ratio": {repr(k): v for k, v in worst.items()},
                "median_max_ratio": float(np.median(list(worst.values())))}
    if kind == "correlation":
        env = [r for r in rows if r["experiment"] == "envelope"][0]
        zm = [r for r in rows if r["experiment"] == "zero_mean"]
        return {"rate": env["value"], "C": env["_C"],
                "zero_mean_ok": all(abs(r["value"]) <= 2 * r["_quad_error"] for r in zm)}
    return {}


def plot_curves(kind: str, rows: Sequence[dict]) -> Dict[str, list]:
    if kind == "birkhoff":
        s = summarize(kind, rows)["by_T"]
        return {"mean_vs_T": [[float(T), v["mean"]] for T, v in s.items()],
                "spread_vs_T": [[float(T), v["spread"]] for T, v in s.items()]}
    if kind in ("walk", "tracking"):
        ns = sorted({r["n"] for r in rows})
        curves = {"mean_e_n": [[n, float(np.mean([r["e_n"] for r in rows if r["n"] == n]))] for n in ns]}
        if rows[0].get("stationarity_defect") is not None:
            curves["mean_defect"] = [[n, float(np.mean([r["stationarity_defect"] for r in rows if r["n"] == n]))]
                                     for n in ns]
        return curves
    if kind == "windtree":
        ts = sorted({r["T"] for r in rows})
        return {"log_mean_running_max": [[math.log(t), math.log(np.mean([r["running_max"] for r in rows
                                                                         if r["T"] == t]))] for t in ts]}
    if kind == "roth":
        return {"ratio": [[r["i"], r["ratio"]] for r in rows]}
    if kind == "correlation":
        return {"correlation_vs_gap": [[abs(r["t"] - r["s"]), r["value"]] for r in rows
                                       if r["experiment"] == "correlation"]}
    if kind == "lyapunov":
        return {"lambda_2_vs_theta": [[r["theta"], r.get("lambda_2", 0.0)] for r in rows]}
    return {}


class Runner:
    """Runs the jobs of one config and owns its output directory."""

    def __init__(self, config: dict, log: Optional[Callable[[str], None]] = None):
        self.config = config
        self.kind = config["experiment"]
        self.out_dir = Path(config["out_dir"])
        if self.kind not in SURFACE_FREE:
            # fail before any work if the surface cannot be found or parsed
            try:
                resolve_surface(config["surface"])
            except KeyError as exc:
                raise ConfigError(exc.args[0]) from None
            except (FlatLabError, ValueError, TypeError) as exc:
                raise ConfigError(f"invalid surface {config['surface']!r}: {exc}") from None
        self.jobs = expand_jobs(config)
        self.rows: List[dict] = []
        self.done = 0
        self.log = log or (lambda msg: None)
        self.started = time.time()

    @property
    def csv_path(self) -> Path:
        return self.out_dir / f"{self.kind}.csv"

    def flush(self, status: str) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_rows(self.csv_path, self.kind, self.rows)
        summary = summarize(self.kind, self.rows)
        if status == "complete":
            write_plot_json(self.out_dir / f"{self.kind}_plot.json", plot_curves(self.kind, self.rows))
        envelope = {
            "config": self.config,
            "build_id": build_id(),
            "status": status,
            "jobs_total": len(self.jobs),
            "jobs_done": self.done,
            "wall_time": time.time() - self.started,
            "csv": self.csv_path.name,
            "records": [{k: _json_safe(v) for k, v in r.items() if not k.startswith("_")} for r in self.rows],
            "summary": summary,
        }
        with open(self.out_dir / "envelope.json", "w") as fh:
            json.dump(envelope, fh, indent=1, sort_keys=True, allow_nan=True)

    def run(self) -> dict:
        fn = JOB_FUNCTIONS[self.kind]
        every = self.config["checkpoint_every"]
        workers = self.config.get("workers") or 1
        pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 and len(self.jobs) > 1 else None
        try:
            results = pool.map(fn, self.jobs) if pool else map(fn, self.jobs)
            for rows in results:
                self.rows.extend(rows)
                self.done += 1
                self.log(f"[{self.done}/{len(self.jobs)}] {self.kind}")
                if self.done % every == 0 and self.done < len(self.jobs):
                    self.flush("partial")
        except BaseException:
            if pool:
                pool.shutdown(wait=False, cancel_futures=True)
            self.flush("interrupted")
            raise
        if pool:
            pool.shutdown()
        self.flush("complete")
        return summarize(self.kind, self.rows)


def _json_safe(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v
