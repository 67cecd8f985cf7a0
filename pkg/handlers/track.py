"""
Команда track: трекинг сетки по цепочке потоков, оверлеи и дрейф
"""

import csv
import logging
from pathlib import Path

from db.database import recorded_run
from services.distill import load_dataset, make_teacher
from services.errors import UsageError
from services.flowcore import FlowField, FramePair, crop_to_multiple, write_image
from services.runconfig import add_flags, load_run_config, require_dir, require_file
from services.studentnet import load_checkpoint, predict_flow
from services.utils import default_out_dir, ensure_output_dir
from services.warp import (
    draw_mesh,
    make_grid_mesh,
    positional_drift,
    stabilization_error,
    track_mesh,
    write_trajectory_csv,
)

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "track", help="протащить сетку по всей последовательности и измерить дрейф",
        description="drift.csv: frame, drift_px (против трекинга по точному потоку), "
                    "start_offset_px, stabilization_error. Модель: --checkpoint, "
                    "либо --teacher (truth = точный поток, zero = нулевой поток).",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, ("data", "checkpoint", "teacher", "noise_sigma", "seed", "out"))
    parser.add_argument("--rows", type=int, default=8, help="строк сетки")
    parser.add_argument("--cols", type=int, default=8, help="столбцов сетки")
    parser.add_argument("--margin", type=float, default=16.0, help="отступ сетки от края, px")
    parser.add_argument("--no-overlays", action="store_true", help="не писать PNG оверлеи")
    parser.set_defaults(handler=cmd_track)


def _flows(cfg, dataset, frames, net=None):
    """Потоки всех пар и имя модели"""
    width, height = frames[0].width, frames[0].height
    if net is not None:
        flows = [predict_flow(net, FramePair(a, b)) for a, b in zip(frames, frames[1:])]
        return flows, "student"
    if cfg.teacher == "zero":
        return [FlowField.zeros(width, height)] * (len(frames) - 1), "zero"
    name = "analytic" if cfg.teacher == "truth" else cfg.teacher
    teacher = make_teacher(name, dataset, sigma=cfg.noise_sigma, seed=cfg.seed)
    flows = [teacher.estimate(dataset.pair(i), i) for i in range(dataset.n_pairs)]
    return flows, teacher.name


def cmd_track(args) -> int:
    """Трекинг от кадра 0 до последнего"""
    cfg = load_run_config(args.config, vars(args))
    data = require_dir(cfg.data, "--data")
    out = ensure_output_dir(Path(cfg.out) if cfg.out else default_out_dir("track"), [data])
    if args.rows < 1 or args.cols < 1:
        raise UsageError("--rows и --cols должны быть >= 1")

    with recorded_run("track", {**cfg.as_dict(), "rows": args.rows, "cols": args.cols},
                      seed=cfg.seed, out_dir=str(out)) as run:
        dataset = load_dataset(data)
        frames = list(dataset.frames)
        truth = list(dataset.truth) if dataset.truth is not None else None
        net = None
        if cfg.checkpoint:
            net = load_checkpoint(require_file(cfg.checkpoint, "--checkpoint"))
            frames = [crop_to_multiple(f, net.config.multiple) for f in frames]
            if truth is not None:
                truth = [crop_to_multiple(f, net.config.multiple) for f in truth]
        flows, model_name = _flows(cfg, dataset, frames, net)

        width, height = frames[0].width, frames[0].height
        mesh = make_grid_mesh(width, height, args.rows, args.cols, args.margin)
        trajectory = track_mesh(mesh, flows)
        start_offset = positional_drift(trajectory, [mesh] * len(trajectory))
        drift = positional_drift(trajectory, track_mesh(mesh, truth)) if truth is not None else None
        stabilization = stabilization_error(frames, flows)

        with (out / "drift.csv").open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["frame", "drift_px", "start_offset_px", "stabilization_error"])
            for n in range(len(frames)):
                writer.writerow([n, "" if drift is None else repr(drift[n]),
                                 repr(start_offset[n]), repr(stabilization[n])])
        write_trajectory_csv(trajectory, out / "trajectory.csv")
        if not args.no_overlays:
            for n, (frame, state) in enumerate(zip(frames, trajectory)):
                write_image(draw_mesh(frame, state), out / "overlay" / f"{n:06d}.png")

        run["results"] = {
            "model": model_name,
            "frames": len(frames),
            "final_start_offset_px": start_offset[-1],
            "mean_drift_px": None if drift is None else sum(drift) / len(drift),
            "lost_points": int(trajectory[-1].lost.sum()),
        }

    print(f"🎯 Трекинг ({model_name}) по {len(frames)} кадрам: смещение сетки от старта "
          f"на последнем кадре {start_offset[-1]:.3f} px")
    if drift is not None:
        print(f"📈 Средний дрейф относительно точного потока: {sum(drift) / len(drift):.3f} px")
    return 0
