"""Command-line pipeline: generate, train, filter, evaluate, serve.

Every setting resolves as CLI flag > config file > built-in default, and the
effective values are reported in a startup banner (one log line per setting,
tagged with where it came from).  The config file is TOML with one table per
subcommand plus shared ``[motion]``, ``[noise]``, and ``[workspace]`` tables.

Exit codes: 0 success, 2 configuration problem, 3 missing or malformed data,
4 numerical failure.  Set ``IROCO_LOG`` to change the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger("iroco")

_EXIT_CONFIG = 2
_EXIT_DATA = 3
_EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    """Unusable configuration: bad file, bad value, or bad flag combination."""


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one invocation, with their provenance."""

    subcommand: str
    settings: dict
    sources: dict  # setting name -> "cli" | "file" | "default"

    def __getitem__(self, name):
        return self.settings[name]

    def banner_lines(self) -> list[str]:
        width = max((len(k) for k in self.settings), default=0)
        return [
            f"{name:<{width}} = {self.settings[name]!r} ({self.sources[name]})"
            for name in sorted(self.settings)
        ]


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        import tomllib  # python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc


def _resolve(subcommand: str, args: argparse.Namespace, defaults: dict) -> RunConfig:
    """Merge CLI flags, the subcommand's config-file table, and defaults."""
    file_cfg = _load_config_file(args.config)
    table = file_cfg.get(subcommand, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{subcommand}] must be a table")
    unknown = set(table) - set(defaults)
    if unknown:
        raise ConfigError(f"[{subcommand}] has unknown settings: {sorted(unknown)}")

    settings, sources = {}, {}
    for name, default in defaults.items():
        cli_value = getattr(args, name.replace("-", "_"), None)
        if cli_value is not None:
            settings[name], sources[name] = cli_value, "cli"
        elif name in table:
            value = table[name]
            if default is not None and not isinstance(value, type(default)):
                # TOML ints are fine where floats are expected.
                if isinstance(default, float) and isinstance(value, int):
                    value = float(value)
                else:
                    raise ConfigError(
                        f"[{subcommand}] {name} should be {type(default).__name__}"
                    )
            settings[name], sources[name] = value, "file"
        else:
            settings[name], sources[name] = default, "default"

    cfg = RunConfig(subcommand=subcommand, settings=settings, sources=sources)
    log.info("resolved configuration for '%s':", subcommand)
    for line in cfg.banner_lines():
        log.info("  %s", line)
    # Shared tables ride along unresolved; subcommands pick what they need.
    object.__setattr__(cfg, "_tables", file_cfg)
    return cfg


def _table(cfg: RunConfig, name: str) -> dict:
    tables = getattr(cfg, "_tables", {})
    table = tables.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    return table


def _build_from_table(cls, table: dict, what: str):
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{what}] settings: {exc}") from exc


def _require_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _session_paths(data: str) -> list[str]:
    if os.path.isfile(data):
        return [data]
    if os.path.isdir(data):
        paths = sorted(
            os.path.join(data, f) for f in os.listdir(data) if f.endswith(".jsonl")
        )
        if paths:
            return paths
    raise FileNotFoundError(f"no session files at: {data}")


# ---------------------------------------------------------------- gen


def cmd_gen(cfg: RunConfig) -> int:
    from .datamodel import dataset_write
    from .synthgen import MotionConfig, NoiseConfig, gen_session

    motion_table = dict(_table(cfg, "motion"))
    for key in ("duration", "rate"):
        # Explicit flags and the [gen] table outrank the shared [motion] table.
        if cfg.sources[key] != "default" or key not in motion_table:
            motion_table[key] = cfg[key]
    motion = _build_from_table(MotionConfig, motion_table, "motion")
    noise = _build_from_table(NoiseConfig, _table(cfg, "noise"), "noise")

    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    total = 0
    for i in range(cfg["sessions"]):
        rng = np.random.default_rng((cfg["seed"], i))
        frames = gen_session(motion, noise, rng)
        path = os.path.join(out_dir, f"session_{i:02d}.jsonl")
        dataset_write(frames, path)
        total += len(frames)
        log.info("wrote %s (%d frames)", path, len(frames))
    log.info("generated %d sessions, %d frames total", cfg["sessions"], total)
    return 0


# ---------------------------------------------------------------- train


def cmd_train(cfg: RunConfig) -> int:
    from .datamodel import dataset_read
    from .denkf.checkpoint import save_checkpoint
    from .denkf.training import TrainConfig, train

    paths = _session_paths(cfg["data"])
    sessions = [dataset_read(p) for p in paths]
    log.info("loaded %d sessions (%d frames)", len(sessions), sum(map(len, sessions)))

    overrides = dict(
        epochs=cfg["epochs"],
        batch_size=cfg["batch"],
        learning_rate=cfg["lr"],
        ensemble_size=cfg["ensemble"],
        window=cfg["window"],
        seed=cfg["seed"],
    )
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        if cfg["preset"] == "smoke":
            tc = TrainConfig.smoke(**overrides)
        elif cfg["preset"] in (None, "full"):
            tc = replace(TrainConfig(), **overrides)
        else:
            raise ConfigError(f"unknown preset: {cfg['preset']!r}")
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    models, stats = train(sessions, tc)

    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "checkpoint.json")
    save_checkpoint(
        models,
        ckpt_path,
        training_meta={
            "epochs": tc.epochs,
            "batch_size": tc.batch_size,
            "learning_rate": tc.learning_rate,
            "ensemble_size": tc.ensemble_size,
            "seed": tc.seed,
            "final_end_to_end": stats[-1].end_to_end if stats else None,
        },
    )
    losses_path = os.path.join(out_dir, "losses.csv")
    with open(losses_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "end_to_end", "transition", "sensor"])
        for s in stats:
            writer.writerow([s.epoch, s.end_to_end, s.transition_loss, s.sensor_loss])
    log.info("wrote %s and %s", ckpt_path, losses_path)
    return 0


# ---------------------------------------------------------------- filter


def _write_filtered(path, run, times, n_members: int, window: int) -> None:
    from .metrics import ensemble_wrist_spread
    from .rotations import BodyModel

    body = BodyModel.default()
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "version": 1,
            "kind": "filtered",
            "state_dim": run.means.shape[1],
            "ensemble": n_members,
            "window": window,
        }
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for t in range(run.means.shape[0]):
            mem = run.members[t] if run.members is not None else None
            row = {
                "t": float(times[t]),
                "state": run.means[t].tolist(),
                "spread": run.spreads[t].tolist(),
                "spread_wrist": ensemble_wrist_spread(mem, body) if mem is not None else 0.0,
                "warm": bool(run.warm[t]),
            }
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def read_filtered(path):
    """Read a filtered-state JSONL file; returns (times, states, spread_wrist, warm)."""
    from .datamodel import FormatError

    times, states, spread_wrist, warm = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad filtered header: {exc}", line=1) from exc
        if header.get("kind") != "filtered" or header.get("version") != 1:
            raise FormatError("not a filtered-state file", line=1)
        dim = int(header["state_dim"])
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                state = np.asarray(row["state"], dtype=np.float64)
                if state.shape != (dim,):
                    raise ValueError(f"state must have {dim} entries")
                times.append(float(row["t"]))
                states.append(state)
                spread_wrist.append(float(row["spread_wrist"]))
                warm.append(bool(row["warm"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"bad filtered row: {exc}", line=lineno) from exc
    return np.asarray(times), np.stack(states), np.asarray(spread_wrist), np.asarray(warm)


def cmd_filter(cfg: RunConfig) -> int:
    from .datamodel import dataset_read, frames_to_arrays
    from .denkf.checkpoint import load_checkpoint
    from .denkf.filtering import filter_session

    models, _ = load_checkpoint(_require_file(cfg["checkpoint"], "checkpoint"))
    frames = dataset_read(_require_file(cfg["data"], "session file"))
    times, obs, _ = frames_to_arrays(frames)

    rng = np.random.default_rng(cfg["seed"])
    run = filter_session(
        obs, models, rng, n_members=cfg["ensemble"], keep_members=True
    )
    out = cfg["out"]
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    _write_filtered(out, run, times, cfg["ensemble"], models.window)
    log.info(
        "filtered %d frames (%d warm-up) -> %s",
        len(times),
        int((~run.warm).sum()),
        out,
    )
    return 0


# ---------------------------------------------------------------- eval


def cmd_eval(cfg: RunConfig) -> int:
    from .datamodel import dataset_read, frames_to_arrays
    from .metrics import (
        gt_wrist_speeds,
        pose_errors,
        session_report,
        write_frame_csv,
        write_summary_json,
    )
    from .rotations import BodyModel

    pred_times, pred_states, spread_wrist, warm = read_filtered(
        _require_file(cfg["pred"], "filtered-state file")
    )
    frames = dataset_read(_require_file(cfg["data"], "session file"))
    times, _, gt = frames_to_arrays(frames)
    if len(times) != len(pred_times) or np.abs(times - pred_times).max() > 1e-9:
        raise ValueError("prediction and ground-truth frames do not line up")

    body = BodyModel.default()
    errors = [
        replace(
            pose_errors(pred_states[k], frames[k].gt, body),
            spread_wrist=spread_wrist[k],
        )
        for k in range(len(times))
    ]
    speeds = gt_wrist_speeds(times, [f.gt for f in frames], body)

    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    write_frame_csv(os.path.join(out_dir, "frames.csv"), times, errors, speeds)
    summary = session_report(errors, speeds)
    summary["warm_frames"] = int(np.asarray(warm).sum())
    write_summary_json(os.path.join(out_dir, "summary.json"), summary)
    log.info(
        "wrote %s (mean wrist error %.2f cm)",
        os.path.join(out_dir, "summary.json"),
        summary["wrist_cm"]["mean"],
    )
    return 0


# ---------------------------------------------------------------- serve


def cmd_serve(cfg: RunConfig) -> int:
    import uvicorn

    from .teleopd import create_app

    app = create_app(
        checkpoint_path=_require_file(cfg["checkpoint"], "checkpoint"),
        rate=cfg["rate"],
        n_members=cfg["ensemble"],
        seed=cfg["seed"],
    )
    log.info("serving on %s:%d", cfg["host"], cfg["port"])
    uvicorn.run(app, host=cfg["host"], port=cfg["port"], log_level="warning")
    return 0


# ---------------------------------------------------------------- wiring

_DEFAULTS: dict[str, dict] = {
    "gen": {
        "out": "runs/data",
        "seed": 0,
        "sessions": 4,
        "duration": 60.0,
        "rate": 50.0,
    },
    "train": {
        "data": "runs/data",
        "out": "runs/train",
        "seed": 0,
        "epochs": None,
        "batch": None,
        "lr": None,
        "ensemble": None,
        "window": None,
        "preset": None,
    },
    "filter": {
        "checkpoint": "runs/train/checkpoint.json",
        "data": "runs/data/session_00.jsonl",
        "out": "runs/filter/filtered.jsonl",
        "seed": 0,
        "ensemble": 32,
    },
    "eval": {
        "pred": "runs/filter/filtered.jsonl",
        "data": "runs/data/session_00.jsonl",
        "out": "runs/eval",
    },
    "serve": {
        "checkpoint": "runs/train/checkpoint.json",
        "host": "127.0.0.1",
        "port": 8472,
        "rate": 50.0,
        "ensemble": 32,
        "seed": 0,
    },
}

_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "filter": cmd_filter,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="iroco",
        description="Smart-device arm tracking: data generation, filter training, "
        "offline filtering, evaluation, and the live teleoperation service.",
    )
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", help="output file or directory")

    p = sub.add_parser("gen", help="generate synthetic labeled sessions")
    common(p)
    p.add_argument("--sessions", type=int, help="number of sessions")
    p.add_argument("--duration", type=float, help="seconds per session")
    p.add_argument("--rate", type=float, help="frames per second")

    p = sub.add_parser("train", help="train filter models on generated sessions")
    common(p)
    p.add_argument("--data", help="session file or directory")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch", type=int, help="batch size")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--ensemble", type=int, help="training ensemble size")
    p.add_argument("--window", type=int, help="history window length")
    p.add_argument("--preset", choices=["smoke", "full"], help="configuration preset")

    p = sub.add_parser("filter", help="run the filter over a recorded session")
    common(p)
    p.add_argument("--checkpoint", help="trained checkpoint path")
    p.add_argument("--data", help="session file")
    p.add_argument("--ensemble", type=int, help="inference ensemble size")

    p = sub.add_parser("eval", help="score filtered states against ground truth")
    common(p)
    p.add_argument("--pred", help="filtered-state file")
    p.add_argument("--data", help="ground-truth session file")

    p = sub.add_parser("serve", help="run the live teleoperation service")
    common(p)
    p.add_argument("--checkpoint", help="trained checkpoint path")
    p.add_argument("--host", help="bind address")
    p.add_argument("--port", type=int, help="bind port")
    p.add_argument("--rate", type=float, help="nominal frame rate")
    p.add_argument("--ensemble", type=int, help="inference ensemble size")
    return ap


def _setup_logging() -> None:
    level_name = os.environ.get("IROCO_LOG", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    from .datamodel import FormatError
    from .denkf.checkpoint import CheckpointMissing
    from .denkf.filtering import SolveFailure
    from .denkf.training import DataTooShort
    from .metrics import TooFew
    from .synthgen import TooShort

    try:
        cfg = _resolve(args.subcommand, args, _DEFAULTS[args.subcommand])
        return _COMMANDS[args.subcommand](cfg)
    except ConfigError as exc:
        log.error("configuration: %s", exc)
        return _EXIT_CONFIG
    except (
        FormatError,
        DataTooShort,
        TooShort,
        TooFew,
        CheckpointMissing,
        FileNotFoundError,
    ) as exc:
        log.error("data: %s", exc)
        return _EXIT_DATA
    except (SolveFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical: %s", exc)
        return _EXIT_NUMERICAL
    except ValueError as exc:
        log.error("data: %s", exc)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
