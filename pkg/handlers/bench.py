"""
Команда bench: время инференса студента против тяжёлой эталонной конфигурации
"""

import csv
import logging
import time
from pathlib import Path

import numpy as np

from db.database import recorded_run
from services.errors import UsageError
from services.flowcore import FramePair, ImageFrame
from services.runconfig import add_flags, load_run_config, require_file
from services.studentnet import heavy_config, init, load_checkpoint, predict_flow
from services.utils import default_out_dir, ensure_output_dir, latency_stats

logger = logging.getLogger(__name__)

WARMUP_RUNS = 3
MIN_RUNS = 30


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "bench", help="замерить инференс студента и тяжёлой конфигурации (x3 ширина)",
        description="timings.csv: model, run, seconds. bench_summary.csv: model, params, mean, "
                    "median, p95 (секунды), speedup = медиана тяжёлой / медиана студента.",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, ("checkpoint", "input_channels", "base_width", "levels", "seed", "out"))
    parser.add_argument("--size", type=int, default=256, help="сторона квадратного входа, px")
    parser.add_argument("--runs", type=int, default=MIN_RUNS, help="замеров после прогрева")
    parser.add_argument("--warmup", type=int, default=WARMUP_RUNS, help="прогревочных прогонов")
    parser.set_defaults(handler=cmd_bench)


def time_inference(net, pair: FramePair, runs: int, warmup: int) -> list[float]:
    """Секунды на каждый из runs прогонов; прогрев в статистику не входит"""
    for _ in range(warmup):
        predict_flow(net, pair, dtype=np.float32)
    timings = []
    for _ in range(runs):
        started = time.perf_counter()
        predict_flow(net, pair, dtype=np.float32)
        timings.append(time.perf_counter() - started)
    return timings


def cmd_bench(args) -> int:
    cfg = load_run_config(args.config, vars(args))
    if args.runs < 1 or args.warmup < 0:
        raise UsageError("--runs должно быть >= 1, --warmup >= 0")
    if args.runs < MIN_RUNS:
        logger.warning("Всего %d замеров: для устойчивой медианы нужно не меньше %d", args.runs, MIN_RUNS)
    out = ensure_output_dir(Path(cfg.out) if cfg.out else default_out_dir("bench"))

    student = load_checkpoint(require_file(cfg.checkpoint, "--checkpoint")) if cfg.checkpoint \
        else init(cfg.net_config())
    heavy = init(heavy_config(student.config))
    if args.size % heavy.config.multiple:
        raise UsageError(f"--size должен делиться на {heavy.config.multiple}")

    rng = np.random.default_rng(cfg.seed)
    channels = 1 if student.config.input_channels == 2 else 3
    shape = (args.size, args.size, channels)
    pair = FramePair(ImageFrame(rng.random(shape)), ImageFrame(rng.random(shape)))

    with recorded_run("bench", {**cfg.as_dict(), "size": args.size, "runs": args.runs},
                      seed=cfg.seed, out_dir=str(out)) as run:
        timings = {
            "student": time_inference(student, pair, args.runs, args.warmup),
            "heavy": time_inference(heavy, pair, args.runs, args.warmup),
        }
        stats = {name: latency_stats(values) for name, values in timings.items()}
        speedup = stats["heavy"]["median"] / stats["student"]["median"]

        with (out / "timings.csv").open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["model", "run", "seconds"])
            for name, values in timings.items():
                for i, value in enumerate(values):
                    writer.writerow([name, i, repr(value)])
        with (out / "bench_summary.csv").open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["model", "params", "mean", "median", "p95", "speedup"])
            for name, net in (("student", student), ("heavy", heavy)):
                s = stats[name]
                writer.writerow([name, net.param_count, repr(s["mean"]), repr(s["median"]), repr(s["p95"]),
                                 repr(speedup) if name == "student" else ""])
        run["results"] = {**{f"{k}_median_s": v["median"] for k, v in stats.items()}, "speedup": speedup}

    for name in ("student", "heavy"):
        s = stats[name]
        print(f"⏱ {name}: mean {s['mean'] * 1000:.1f} мс, median {s['median'] * 1000:.1f} мс, "
              f"p95 {s['p95'] * 1000:.1f} мс")
    print(f"🚀 Ускорение студента: x{speedup:.2f}")
    return 0
