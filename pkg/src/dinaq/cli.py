"""Batch command line: simulate datasets, estimate Q-matrices, evaluate
recovery, compare model fit, and replay recorded runs.

Every command resolves its settings as flags > config file > defaults,
snapshots the resolved settings into a JSON manifest next to its
outputs, and is deterministic given inputs and seed, so ``dinaq replay
manifest.json`` reproduces the original data files byte for byte.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

from . import __version__
from .evaluate import mean_recovery, negative_elbo_fit
from .io import (
    read_binary_matrix,
    read_config_file,
    read_manifest,
    write_binary_matrix,
    write_elbo_trace,
    write_manifest,
    write_rates_csv,
    write_run_trace,
)
from .model import QMatrix, ResponseMatrix
from .search import SearchConfig, estimate, full_elbo_trace
from .simulate import SimConfig, builtin_names, builtin_true_q, generate
from .vb import DEFAULT_MAX_SWEEPS, DEFAULT_TOL

_LIST = object()  # sentinel type tag for comma-separated lists

_SIM_SPEC = {
    "true_q": (str, None),
    "n": (int, None),
    "rho": (float, 0.1),
    "slip": (float, 0.2),
    "guess": (float, 0.2),
    "seed": (int, 0),
}
_EST_SPEC = {
    "responses": (str, None),
    "k": (int, None),
    "runs": (int, 10),
    "iters": (int, 550),
    "discard": (int, 50),
    "subset": (int, None),
    "seed": (int, 0),
    "vb_tol": (float, DEFAULT_TOL),
    "vb_max_sweeps": (int, DEFAULT_MAX_SWEEPS),
    "initial_q": (str, None),
    "full_trace": (bool, False),
    "without_replacement": (bool, False),
}
_EVAL_SPEC = {
    "estimates": (_LIST, None),
    "truth": (str, None),
    "align": (bool, True),
}
_FIT_SPEC = {
    "responses": (str, None),
    "q": (_LIST, None),
    "restarts": (int, 1),
    "seed": (int, 0),
    "vb_tol": (float, DEFAULT_TOL),
    "vb_max_sweeps": (int, DEFAULT_MAX_SWEEPS),
}

_REQUIRED = {
    "simulate": ("true_q", "n"),
    "estimate": ("responses", "k"),
    "evaluate": ("estimates", "truth"),
    "fit": ("responses", "q"),
}


def _coerce(value: str, kind):
    if kind is bool:
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if kind is _LIST:
        return [item.strip() for item in value.split(",") if item.strip()]
    return kind(value)


def resolve_config(command: str, spec: dict, flags: dict,
                   config_path: str | None) -> dict:
    """Layer flag values over config-file values over defaults."""
    resolved = {key: default for key, (_, default) in spec.items()}
    if config_path:
        for key, raw in read_config_file(config_path).items():
            if key not in spec:
                raise ValueError(f"unknown config key {key!r} for {command}")
            resolved[key] = _coerce(raw, spec[key][0])
    for key, value in flags.items():
        if key in spec and value is not None:
            resolved[key] = value
    for key in _REQUIRED[command]:
        if resolved.get(key) is None:
            raise ValueError(f"{command}: missing required setting {key!r}")
    return resolved


def _load_qmatrix(spec: str) -> QMatrix:
    if spec in builtin_names():
        return builtin_true_q(spec)
    return QMatrix(read_binary_matrix(spec))


def _manifest(command: str, cfg: dict, outputs: list[str]) -> dict:
    return {
        "command": command,
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": cfg.get("seed"),
        "config": cfg,
        "outputs": outputs,
    }


def run_simulate(cfg: dict, out_dir: Path) -> list[str]:
    true_q = _load_qmatrix(cfg["true_q"])
    dataset = generate(SimConfig(
        true_q=true_q, n_respondents=cfg["n"], rho=cfg["rho"],
        slip=cfg["slip"], guess=cfg["guess"], seed=cfg["seed"],
    ))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_binary_matrix(out_dir / "responses.csv", dataset.responses.entries)
    write_binary_matrix(out_dir / "attributes.csv", dataset.attributes)
    write_binary_matrix(out_dir / "true_q.csv", true_q.entries)
    return ["responses.csv", "attributes.csv", "true_q.csv"]


def run_estimate(cfg: dict, out_dir: Path, threads: int) -> list[str]:
    x = ResponseMatrix(read_binary_matrix(cfg["responses"]))
    if cfg["subset"] is None:
        cfg["subset"] = max(1, x.n_respondents // 2)
    initial_q = None
    if cfg["initial_q"]:
        initial_q = QMatrix(read_binary_matrix(cfg["initial_q"]))
    config = SearchConfig(
        n_attributes=cfg["k"], subset_size=cfg["subset"], runs=cfg["runs"],
        iters=cfg["iters"], discard=cfg["discard"], seed=cfg["seed"],
        vb_tol=cfg["vb_tol"], vb_max_sweeps=cfg["vb_max_sweeps"],
        initial_q=initial_q, with_replacement=not cfg["without_replacement"],
    )
    q_hat, results = estimate(x, config, n_jobs=threads)

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["qhat.csv"]
    write_binary_matrix(out_dir / "qhat.csv", q_hat.entries)
    for result in results:
        name = f"trace_run_{result.run_index + 1:02d}.csv"
        write_run_trace(out_dir / name, result.records)
        outputs.append(name)
    if cfg["full_trace"]:
        best = max(results, key=lambda res: (res.mean_elbo, -res.run_index))
        trace = full_elbo_trace(x, best.records, seed=cfg["seed"])
        write_elbo_trace(out_dir / "full_elbo.csv", trace)
        outputs.append("full_elbo.csv")
    return outputs


def run_evaluate(cfg: dict, out_dir: Path | None) -> list[str]:
    truth = QMatrix(read_binary_matrix(cfg["truth"]))
    estimates = [QMatrix(read_binary_matrix(path)) for path in cfg["estimates"]]
    report = mean_recovery(estimates, truth, align=cfg["align"])

    print(f"datasets: {len(estimates)}")
    print(f"aligned: {str(cfg['align']).lower()}")
    print(f"mrr: {report.mrr!r}")
    for i, (rate, perm) in enumerate(zip(report.rates, report.permutations), start=1):
        perm_txt = "-".join(str(p + 1) for p in perm)
        print(f"rate_{i}: {float(rate)!r}")
        print(f"permutation_{i}: {perm_txt}")

    if out_dir is None:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rates_csv(out_dir / "rates.csv", report.rates, report.permutations)
    return ["rates.csv"]


def run_fit(cfg: dict, out_dir: Path | None) -> list[str]:
    x = ResponseMatrix(read_binary_matrix(cfg["responses"]))
    rows = []
    for path in cfg["q"]:
        q = QMatrix(read_binary_matrix(path))
        value = negative_elbo_fit(x, q, restarts=cfg["restarts"], seed=cfg["seed"],
                                  tol=cfg["vb_tol"], max_sweeps=cfg["vb_max_sweeps"])
        rows.append((path, value))

    width = max(len(path) for path, _ in rows)
    print(f"{'q_matrix':<{width}}  negative_elbo")
    for path, value in rows:
        print(f"{path:<{width}}  {value!r}")

    if out_dir is None:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "fit.csv", "w", encoding="utf-8", newline="\n") as handle:
        handle.write("q_matrix,negative_elbo\n")
        for path, value in rows:
            handle.write(f"{path},{value!r}\n")
    return ["fit.csv"]


def _finish(command: str, cfg: dict, outputs: list[str],
            out_dir: Path | None) -> None:
    if out_dir is not None:
        write_manifest(out_dir / "manifest.json", _manifest(command, cfg, outputs))


def _default_threads() -> int:
    env = os.environ.get("DINAQ_THREADS", "").strip()
    return int(env) if env else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dinaq",
        description="Estimate DINA Q-matrices by subsampled variational search.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    bool_opt = argparse.BooleanOptionalAction

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--config", help="flat key = value settings file")
    p_sim.add_argument("--true-q", dest="true_q",
                       help=f"built-in name ({', '.join(builtin_names())}) or CSV path")
    p_sim.add_argument("--n", type=int, help="number of respondents")
    p_sim.add_argument("--rho", type=float, help="latent attribute correlation")
    p_sim.add_argument("--slip", type=float)
    p_sim.add_argument("--guess", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out-dir", required=True)

    p_est = sub.add_parser("estimate", help="estimate a Q-matrix from responses")
    p_est.add_argument("--config")
    p_est.add_argument("--responses", help="response CSV (0/1, one respondent per line)")
    p_est.add_argument("--k", type=int, help="number of attributes")
    p_est.add_argument("--runs", type=int)
    p_est.add_argument("--iters", type=int)
    p_est.add_argument("--discard", type=int)
    p_est.add_argument("--subset", type=int, help="subsample size (default N/2)")
    p_est.add_argument("--seed", type=int)
    p_est.add_argument("--vb-tol", dest="vb_tol", type=float)
    p_est.add_argument("--vb-max-sweeps", dest="vb_max_sweeps", type=int)
    p_est.add_argument("--initial-q", dest="initial_q", help="starting Q-matrix CSV")
    p_est.add_argument("--full-trace", dest="full_trace", action=bool_opt,
                       help="recompute the selected run's ELBOs on the full data")
    p_est.add_argument("--without-replacement", dest="without_replacement",
                       action=bool_opt)
    p_est.add_argument("--threads", type=int, help="parallel runs (env DINAQ_THREADS)")
    p_est.add_argument("--out-dir", required=True)

    p_eval = sub.add_parser("evaluate", help="score estimates against a truth")
    p_eval.add_argument("--config")
    p_eval.add_argument("--estimates", nargs="+", help="estimated Q-matrix CSVs")
    p_eval.add_argument("--truth", help="reference Q-matrix CSV")
    p_eval.add_argument("--align", action=bool_opt,
                        help="align columns before scoring (default on)")
    p_eval.add_argument("--out-dir")

    p_fit = sub.add_parser("fit", help="compare Q-matrices by negative ELBO")
    p_fit.add_argument("--config")
    p_fit.add_argument("--responses")
    p_fit.add_argument("--q", nargs="+", help="Q-matrix CSVs to compare")
    p_fit.add_argument("--restarts", type=int)
    p_fit.add_argument("--seed", type=int)
    p_fit.add_argument("--vb-tol", dest="vb_tol", type=float)
    p_fit.add_argument("--vb-max-sweeps", dest="vb_max_sweeps", type=int)
    p_fit.add_argument("--out-dir")

    p_replay = sub.add_parser("replay", help="re-run a recorded manifest")
    p_replay.add_argument("manifest")
    p_replay.add_argument("--out-dir", required=True)
    p_replay.add_argument("--threads", type=int)

    return parser


_SPECS = {
    "simulate": _SIM_SPEC,
    "estimate": _EST_SPEC,
    "evaluate": _EVAL_SPEC,
    "fit": _FIT_SPEC,
}


def _dispatch(command: str, cfg: dict, out_dir: Path | None, threads: int) -> None:
    if command == "simulate":
        outputs = run_simulate(cfg, out_dir)
    elif command == "estimate":
        outputs = run_estimate(cfg, out_dir, threads)
    elif command == "evaluate":
        outputs = run_evaluate(cfg, out_dir)
    elif command == "fit":
        outputs = run_fit(cfg, out_dir)
    else:
        raise ValueError(f"unknown command {command!r}")
    _finish(command, cfg, outputs, out_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            manifest = read_manifest(args.manifest)
            command = manifest["command"]
            if command not in _SPECS:
                raise ValueError(f"manifest has unknown command {command!r}")
            cfg = resolve_config(command, _SPECS[command], manifest["config"], None)
            threads = args.threads if args.threads else _default_threads()
            _dispatch(command, cfg, Path(args.out_dir), threads)
        else:
            flags = vars(args)
            cfg = resolve_config(args.command, _SPECS[args.command], flags,
                                 flags.get("config"))
            out_dir = Path(args.out_dir) if getattr(args, "out_dir", None) else None
            threads = getattr(args, "threads", None) or _default_threads()
            _dispatch(args.command, cfg, out_dir, threads)
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
