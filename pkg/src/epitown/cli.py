"""Command-line front end.

One YAML config file describes a run; `town1k` and `town10k` are shipped
aliases.  Scalar keys can be overridden per-invocation through environment
variables (PANDEMIC_SECTION__KEY=value) and a handful of flags; precedence
is flags > environment > file > built-in defaults.  Unknown config keys are
rejected rather than ignored.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .engine import EngineConfig, default_config, run
from .interventions import TESTING_PRESETS, testing_preset
from .policies import benchmark_config, heuristic_policy
from .world import ConfigError

ENV_PREFIX = "PANDEMIC_"
CONFIG_ALIASES = ("town1k", "town10k")


def _packaged_config(name: str) -> Path:
    return resources.files("epitown").joinpath(f"configs/{name}.yaml")


def load_config_dict(spec: str | None) -> dict:
    """Read the config file (or alias) into a plain dict."""
    if spec is None:
        return {}
    if spec in CONFIG_ALIASES:
        text = _packaged_config(spec).read_text()
    else:
        path = Path(spec)
        if not path.exists():
            raise ConfigError(f"config file not found: {spec}")
        text = path.read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def _env_overrides(environ=None) -> dict:
    """PANDEMIC_A__B=x becomes {'a': {'b': x}}; values parse as YAML."""
    environ = environ if environ is not None else os.environ
    out: dict = {}
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        parts = [p.lower() for p in key[len(ENV_PREFIX):].split("__") if p]
        if not parts:
            continue
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return out


def _deep_merge(base: dict, extra: dict) -> dict:
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_merge(base[k], v)
        else:
            base[k] = v
    return base


def _coerce_into(obj, data: dict, path: str):
    """Apply a dict onto a dataclass instance, strictly."""
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, val in data.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {path}{key}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(val, dict):
            _coerce_into(current, val, f"{path}{key}.")
        elif isinstance(current, tuple) and isinstance(val, (list, tuple)):
            setattr(obj, key, tuple(val))
        else:
            setattr(obj, key, val)
    return obj


def realize_config(data: dict) -> EngineConfig:
    """Build an EngineConfig from a merged config dict."""
    data = copy.deepcopy(data)
    cfg = default_config()
    testing = data.get("testing")
    if isinstance(testing, dict) and "preset" in testing:
        preset = testing.pop("preset")
        tcfg, _stay_home = testing_preset(str(preset))
        cfg.testing = tcfg
    _coerce_into(cfg, data, "")
    return cfg


def build_config(spec: str | None, flag_overlay: dict | None = None) -> EngineConfig:
    data = load_config_dict(spec)
    _deep_merge(data, _env_overrides())
    if flag_overlay:
        _deep_merge(data, flag_overlay)
    return realize_config(data)


def parse_seeds(spec: str) -> list[int]:
    """Either a count ('30' means seeds 1..30) or an explicit comma list."""
    spec = spec.strip()
    if "," in spec:
        return [int(s) for s in spec.split(",") if s.strip()]
    n = int(spec)
    if n <= 0:
        raise ConfigError("seed count must be positive")
    return list(range(1, n + 1))


def parse_levels(spec: str) -> list:
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(None if tok.lower() == "none" else float(tok))
    return out


def parse_grid(spec: str) -> list[float]:
    """Comma list, or colon-range a:step:b inclusive of both endpoints."""
    if ":" in spec:
        lo, step, hi = (float(x) for x in spec.split(":"))
        if step <= 0:
            raise ConfigError("grid step must be positive")
        vals = []
        x = lo
        while x <= hi + 1e-12:
            vals.append(round(x, 10))
            x += step
        return vals
    return [float(x) for x in spec.split(",") if x.strip()]


def _metadata_line(args_desc: str) -> str:
    import datetime

    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return f"# epitown {args_desc} generated={stamp}"


def _write_run_csv(path: Path, res, desc: str) -> None:
    path.write_text(_metadata_line(desc) + "\n" + res.to_csv())


def cmd_run(args) -> int:
    overlay = {}
    if args.days is not None:
        overlay["horizon_days"] = args.days
    if args.stage_table:
        overlay["stage_table"] = args.stage_table
    cfg = build_config(args.config, overlay)
    policy_name = None if args.policy in (None, "none") else args.policy
    if policy_name:
        # benchmark names imply their native stage table (swe, ita)
        cfg = benchmark_config(policy_name, cfg)
    seeds = parse_seeds(args.seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in seeds:
        # fresh policy per seed: the ladders carry trigger state
        policy = heuristic_policy(policy_name, cfg.stage_table) if policy_name else None
        res = run(
            cfg,
            seed=s,
            policy=policy,
            action_period=args.action_period,
            collect_contacts=args.collect_contacts,
            backend=args.backend,
        )
        _write_run_csv(out / f"seed_{s}.csv", res, f"run seed={s} policy={args.policy}")
    agg = analysis.multi_seed(
        cfg, policy_name, seeds, action_period=args.action_period, backend=args.backend
    )
    analysis.write_summary_csv(out / "summary.csv", {args.policy or "none": agg})
    analysis.write_tidy_csv(out / "tidy.csv", {args.policy or "none": agg})
    print(f"wrote {len(seeds)} run CSVs + summary to {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args.config)
    levels = parse_levels(args.levels)
    stats = analysis.sensitivity_sweep(
        args.axis, levels, parse_seeds(args.seeds), base_config=cfg
    )
    named = {f"{args.axis}={lvl}": st for lvl, st in stats.items()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_tidy_csv(out / "sweep_tidy.csv", named)
    analysis.write_summary_csv(out / "sweep_summary.csv", named)
    for name, st in named.items():
        print(
            f"{name}: deaths={st.scalar_mean('cumulative_deaths'):.2f} "
            f"peak_day={st.scalar_mean('time_to_peak'):.1f}"
        )
    return 0


def cmd_testing_matrix(args) -> int:
    cfg = build_config(args.config)
    presets = (
        [p.strip() for p in args.presets.split(",") if p.strip()]
        if args.presets
        else None
    )
    stats = analysis.testing_matrix(presets, parse_seeds(args.seeds), base_config=cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_tidy_csv(out / "testing_tidy.csv", stats)
    analysis.write_summary_csv(out / "testing_summary.csv", stats)
    for name, st in stats.items():
        print(
            f"{name}: infected={st.scalar_mean('cumulative_infected'):.1f} "
            f"ttp_var={st.scalar_var('time_to_peak'):.2f}"
        )
    return 0


def cmd_calibrate(args) -> int:
    cfg = build_config(args.config)
    result = analysis.calibrate_spread_rate(
        parse_grid(args.grid),
        target_days=args.target_days,
        seeds=parse_seeds(args.seeds),
        base_config=cfg,
    )
    for g in sorted(result.table):
        print(f"  spread={g}: mean time-to-peak-deaths {result.table[g]:.1f}")
    print(f"chosen spread-rate mean: {result.chosen}")
    return 0


def cmd_train(args) -> int:
    from .sac import SacHyperparams, sac_train

    cfg = build_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hyper = SacHyperparams(
        total_steps=args.steps,
        stage_change_penalty=args.stage_change_penalty,
    )
    periods = None
    if args.action_period:
        parts = tuple(int(x) for x in str(args.action_period).split(","))
        periods = parts[0] if len(parts) == 1 else parts
    sac_train(
        cfg,
        hyper,
        seed=args.seed,
        action_period=periods,
        checkpoint_path=out / "sac.ckpt",
        curve_path=out / "curve.csv",
        snapshot_dir=(out / "snapshots") if args.snapshots else None,
        log=print if args.verbose else None,
    )
    print(f"checkpoint and curve written to {out}")
    return 0


def cmd_eval(args) -> int:
    from .sac import (
        evaluate_benchmark,
        evaluate_checkpoint,
        evaluate_random,
        load_policy,
    )

    if args.population:
        cfg = build_config("town1k" if args.population == "1k" else "town10k")
    else:
        cfg = build_config(args.config)
    seeds = parse_seeds(args.seeds)
    policy = load_policy(args.checkpoint)
    rows = [("learned", evaluate_checkpoint(policy, seeds, cfg, args.action_period))]
    for name in (args.benchmarks.split(",") if args.benchmarks else []):
        name = name.strip()
        if not name:
            continue
        if name == "random":
            rows.append((name, evaluate_random(seeds, cfg, args.action_period)))
        else:
            # names carry their native stage table (swe, ita)
            rows.append(
                (name, evaluate_benchmark(name, seeds, cfg, args.action_period))
            )
    for name, vals in rows:
        print(f"{name}: mean={vals.mean():.3f} sd={vals.std(ddof=1) if len(vals) > 1 else 0.0:.3f}")
    return 0


def cmd_connectivity(args) -> int:
    cfg = build_config(args.config)
    if args.days is not None:
        cfg.horizon_days = args.days
    table = __import__("epitown.interventions", fromlist=["stage_table"]).stage_table(
        cfg.stage_table
    )
    lines = ["stage,day,components,edges"]
    means = {}
    for stage_txt in args.stages.split(","):
        stage = int(stage_txt)
        reg = table[stage]
        res = analysis._fixed_regulation_run(cfg, reg, args.seed, collect_contacts=True)
        series = analysis.connectivity_series(res.daily_pairs, res.world.n)
        for g in series:
            lines.append(f"{stage},{g.day},{g.components},{len(g.edges[0])}")
        comps = np.array([g.components for g in series])
        means[stage] = comps.mean()
        print(
            f"stage {stage}: mean components {comps.mean():.1f}, "
            f"weekend-peak fraction {analysis.weekend_peak_fraction(comps):.2f}"
        )
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        config_alias=args.config or "town1k",
        max_sessions=args.capacity,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epitown", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, config_default="town1k"):
        p.add_argument("--config", default=config_default, help="path or alias (town1k, town10k)")
        p.add_argument("--seeds", default="30", help="count ('30') or comma list ('3,7')")

    p = sub.add_parser("run", help="simulate one policy across seeds")
    add_common(p)
    p.add_argument("--policy", default="none")
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--stage-table", default=None)
    p.add_argument("--action-period", type=int, default=None)
    p.add_argument("--backend", default=None, choices=(None, "compiled", "python"))
    p.add_argument("--collect-contacts", action="store_true")
    p.add_argument("--out", default="results")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="one-axis sensitivity sweep")
    add_common(p)
    p.add_argument("--axis", required=True, choices=analysis.SWEEP_AXES)
    p.add_argument("--levels", required=True, help="comma list; 'none' allowed for gathering")
    p.add_argument("--out", default="results/sweep")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("testing-matrix", help="testing/tracing preset grid")
    add_common(p, config_default="town1k")
    p.add_argument("--presets", default=None, help=f"subset of {','.join(TESTING_PRESETS)}")
    p.add_argument("--out", default="results/testing")
    p.set_defaults(fn=cmd_testing_matrix)

    p = sub.add_parser("calibrate", help="grid-search the spread-rate mean")
    add_common(p, config_default="town1k")
    p.add_argument("--grid", default="0.01:0.005:0.03", help="a:step:b or comma list")
    p.add_argument("--target-days", type=float, default=30.0)
    p.set_defaults(fn=cmd_calibrate)
    p.set_defaults(seeds="8")

    p = sub.add_parser("train", help="train the SAC policy")
    p.add_argument("--config", default="town1k")
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument(
        "--action-period",
        default="1,3",
        help="decision cadence in days; a comma list trains across cadences",
    )
    p.add_argument(
        "--stage-change-penalty",
        type=float,
        default=0.0,
        help="training-only extra penalty per stage move (cadence robustness)",
    )
    p.add_argument(
        "--snapshots",
        action="store_true",
        help="also save numbered checkpoints every 10k steps under OUT/snapshots",
    )
    p.add_argument("--out", default="checkpoints")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against benchmarks")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", default="town1k")
    p.add_argument("--population", choices=("1k", "10k"), default=None)
    p.add_argument("--seeds", default="30")
    p.add_argument("--action-period", type=int, default=None, help="1, 3 or 7")
    p.add_argument("--benchmarks", default="random,s0,gi")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("connectivity", help="daily contact-graph components")
    p.add_argument("--config", default="town1k")
    p.add_argument("--stages", default="0,4")
    p.add_argument("--days", type=int, default=63)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_connectivity)

    p = sub.add_parser("serve", help="start the interactive session service")
    p.add_argument("--config", default="town1k")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--capacity", type=int, default=8)
    p.set_defaults(fn=cmd_serve)

    return ap


def dispatch(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, not usage
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
