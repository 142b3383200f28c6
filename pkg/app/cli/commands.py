"""
Command-line surface: train, eval, simulate and sweep.

Each command resolves its configuration, writes a manifest into the output
directory and returns a process exit code. Exceptions propagate to
app.main, which turns them into a JSON error line and an exit code.
"""

import argparse
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from app.core.config import load_model_params, load_pid_gains, load_train_config, settings
from app.core.exceptions import EXIT_OK, ConfigError
from app.core.logging import get_logger, set_run_id
from app.models.config import SLIDER_MAX, SLIDER_MIN, PidGains, RandomizationConfig, TrainConfig
from app.models.evaluation import CONTROLLER_KINDS, GoalGrid
from app.models.manifest import RunManifest
from app.models.params import ModelParams
from app.models.task import Goal
from app.repositories.checkpoint_repo import CheckpointRepository
from app.repositories.report_repo import ReportRepository, dump_json
from app.services.environment import BlimpEnv
from app.services.evalharness import (
    build_controller,
    evaluate,
    improvement_table,
    merge_reports,
    slider_trend,
    symmetry_report,
    trajectory_rmse,
)
from app.services.trainer import rollout, train

logger = get_logger(__name__)


def parse_goal(text: str) -> tuple[float, float, float]:
    """Parse "x,y,z" into a goal tuple."""
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"goal must be x,y,z numbers, got '{text}'") from e
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"goal must have three components, got '{text}'")
    return values


def parse_override(text: str) -> tuple[str, Any]:
    """Parse "a.b=value"; the value is read as JSON when possible."""
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"override must look like key=value, got '{text}'")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Nested override dict from --set entries and --seed."""
    overrides: dict[str, Any] = {}
    for key, value in getattr(args, "overrides", None) or []:
        node = overrides
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return overrides


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    return load_train_config(
        config_path=getattr(args, "config", None),
        preset=getattr(args, "preset", None),
        overrides=overrides_from_args(args),
    )


def resolve_model_params(path: Optional[Path]) -> ModelParams:
    """Explicit paths must exist; the default path falls back to built-in values."""
    if path is not None:
        return load_model_params(path)
    if settings.model_params_path.exists():
        return load_model_params(settings.model_params_path)
    logger.debug(f"{settings.model_params_path} not found, using built-in model parameters")
    return ModelParams()


def resolve_pid_gains(path: Optional[Path]) -> PidGains:
    if path is not None:
        return load_pid_gains(path)
    if settings.pid_gains_path.exists():
        return load_pid_gains(settings.pid_gains_path)
    return load_pid_gains(None)


def _out_dir(args: argparse.Namespace, command: str) -> Path:
    return Path(args.out) if args.out else settings.out_dir / command


def _manifest(command: str, cfg: TrainConfig, params: ModelParams, extra: Optional[dict] = None, checkpoint=None) -> RunManifest:
    config = {"train": cfg.model_dump(mode="json"), "model_params": params.model_dump(mode="json")}
    config.update(extra or {})
    return RunManifest(
        command=command,
        seed=cfg.seed,
        config=config,
        checkpoint=str(checkpoint) if checkpoint else None,
        created_at=datetime.now(timezone.utc),
    )


def cmd_train(args: argparse.Namespace) -> int:
    """Resolve config, write the manifest and run two-stage training."""
    cfg = resolve_config(args)
    params = resolve_model_params(args.model_params)
    out_dir = _out_dir(args, "train")
    set_run_id(f"train-{cfg.seed}")

    reports = ReportRepository(out_dir)
    reports.write_manifest(_manifest("train", cfg, params))
    logger.info(f"Training into {out_dir} (M={cfg.total_episodes}, N={cfg.stage1_episodes})")
    summary = train(cfg, params, out_dir)
    logger.info(
        f"Done: {summary.episodes_run} episodes, final goal rate "
        f"{summary.evaluations[-1].goal_rate if summary.evaluations else float('nan'):.2f}"
    )
    return EXIT_OK


def _load_checkpoint(path: Optional[Path], seed: int):
    if path is None:
        return None, None
    agent, outer, _ = CheckpointRepository.load(path, seed=seed)
    return agent, outer


def _evaluate_kinds(args: argparse.Namespace, kinds: list[str], command: str) -> int:
    cfg = resolve_config(args)
    params = resolve_model_params(args.model_params)
    gains = resolve_pid_gains(args.pid_gains)
    agent, outer = _load_checkpoint(args.checkpoint, cfg.seed)
    out_dir = _out_dir(args, command)
    set_run_id(f"{command}-{cfg.seed}")
    reports = ReportRepository(out_dir)
    reports.write_manifest(_manifest(
        command, cfg, params, {"pid_gains": gains.model_dump(mode="json"), "controllers": kinds},
        checkpoint=args.checkpoint,
    ))

    def export(result, record) -> None:
        if args.trajectories:
            name = f"{result.controller}_{result.zeta[0]:+.1f}_{result.zeta[1]:+.1f}_{result.zeta[2]:+.1f}_t{result.trial}"
            reports.write_trajectory_csv(record, name.replace(":", ""))

    section_reports = []
    for kind in kinds:
        controller = build_controller(kind, agent, outer, gains, params, cfg.env)
        section_reports.append(evaluate(
            controller, GoalGrid(), trials=args.trials, seed=cfg.seed, params=params,
            env_config=cfg.env, gamma=cfg.sac.gamma, on_trial=export,
        ))
    report = merge_reports(section_reports)
    reports.write_report(report)
    reports.write_trials_csv(report)

    if command == "sweep":
        analysis: dict[str, Any] = {"improvement_over": {}}
        if outer is not None:
            analysis["slider_trend"] = slider_trend(report).model_dump(mode="json")
            analysis["symmetry"] = symmetry_report(report).model_dump(mode="json")
            analysis["improvement_over"] = improvement_table(report, "bilevel")
        dump_json(analysis, out_dir / "analysis.json")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate one controller kind on the goal grid."""
    return _evaluate_kinds(args, [args.controller], "eval")


def cmd_sweep(args: argparse.Namespace) -> int:
    """Evaluate all five controllers and merge their reports."""
    kinds = list(CONTROLLER_KINDS)
    if args.checkpoint is None:
        kinds = ["pid-spg"]
        logger.warning("No checkpoint given: sweeping the PID-SPG baseline only")
    return _evaluate_kinds(args, kinds, "sweep")


def cmd_simulate(args: argparse.Namespace) -> int:
    """One deterministic rollout to a single goal, exported as a trajectory CSV."""
    cfg = resolve_config(args)
    params = resolve_model_params(args.model_params)
    gains = resolve_pid_gains(args.pid_gains)
    agent, outer = _load_checkpoint(args.checkpoint, cfg.seed)
    kind = args.controller or ("bilevel" if outer is not None else "pid-spg")
    controller = build_controller(kind, agent, outer, gains, params, cfg.env)

    zeta = args.goal
    if not cfg.env.workspace.contains(zeta):
        logger.warning(f"Goal {zeta} lies outside the training workspace; simulating anyway")
    if args.slider is not None and not SLIDER_MIN <= args.slider <= SLIDER_MAX:
        raise ConfigError(f"--slider {args.slider} is outside [{SLIDER_MIN}, {SLIDER_MAX}] m")
    c = args.slider if args.slider is not None else controller.slider(zeta)

    out_dir = _out_dir(args, "simulate")
    reports = ReportRepository(out_dir)
    reports.write_manifest(_manifest(
        "simulate", cfg, params, {"controller": kind, "goal": list(zeta), "slider": c},
        checkpoint=args.checkpoint,
    ))
    env = BlimpEnv(params, cfg.env, RandomizationConfig(params=False, initial_state=False))
    goal = Goal(zeta=zeta, r_g=cfg.env.goal_radius)
    record = rollout(env, goal, c, cfg.seed, controller.factory(zeta), cfg.sac.gamma)
    path = reports.write_trajectory_csv(record, "trajectory")
    result = {
        "controller": kind,
        "goal": list(zeta),
        "c": c,
        "termination": record.termination.value,
        "steps": len(record.steps),
        "episode_return": record.episode_return,
        "rmse": trajectory_rmse(record),
        "trajectory": str(path.relative_to(out_dir)),
    }
    dump_json(result, out_dir / "simulation.json")
    logger.info(f"Simulated {kind} to {zeta}: {record.termination.value}, RMSE {result['rmse']:.3f} m")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="Training config JSON")
    p.add_argument("--preset", choices=["paper", "desk"], help="Episode-count preset")
    p.add_argument("--seed", type=int, help="Master seed")
    p.add_argument("--out", type=str, help="Output directory")
    p.add_argument("--model-params", type=Path, help="Model parameter JSON")
    p.add_argument(
        "--set", dest="overrides", action="append", type=parse_override, metavar="KEY=VALUE",
        help="Config override, e.g. sac.batch_size=128 (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blimp-bilevel",
        description="Bi-level RL control of a blimp with a movable slider mass",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Two-stage bi-level training")
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    for name, handler, help_text in (
        ("eval", cmd_eval, "Evaluate one controller on the 27-goal grid"),
        ("sweep", cmd_sweep, "Evaluate all five controllers and merge the reports"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--checkpoint", type=Path, help="Checkpoint JSON from training")
        p.add_argument("--pid-gains", type=Path, help="PID-SPG gains JSON")
        p.add_argument("--trials", type=int, default=3, help="Trials per goal")
        p.add_argument("--trajectories", action="store_true", help="Also write trajectory CSVs")
        if name == "eval":
            p.add_argument("--controller", choices=CONTROLLER_KINDS, required=True)
        p.set_defaults(handler=handler)

    p = sub.add_parser("simulate", help="Single deterministic rollout with trajectory export")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, help="Checkpoint JSON (omit for PID-SPG)")
    p.add_argument("--pid-gains", type=Path, help="PID-SPG gains JSON")
    p.add_argument("--controller", choices=CONTROLLER_KINDS)
    p.add_argument("--goal", type=parse_goal, required=True, help="Target as x,y,z in meters")
    p.add_argument("--slider", type=float, help="Override c in meters")
    p.set_defaults(handler=cmd_simulate)
    return parser
