"""
Команды pretrain (общий студент) и distill (дообучение на пациенте)
"""

import logging
import sys
from pathlib import Path

from db.database import recorded_run
from services.distill import AnalyticTeacher, fine_tune, generate_gold, load_dataset, pretrain
from services.errors import UsageError
from services.runconfig import add_flags, load_run_config, require_dir, require_file
from services.studentnet import init, load_checkpoint, save_checkpoint
from services.synthdata import make_regime_dataset
from services.utils import ensure_output_dir

logger = logging.getLogger(__name__)

NET_KEYS = ("input_channels", "base_width", "levels", "seed")
TRAIN_KEYS = ("max_epochs", "val_every", "patience", "min_rel_improvement", "batch_size", "crop_height",
              "crop_width", "learning_rate", "loss_weights", "photometric_augment", "threads")

CHECKPOINT_NAME = "student.ckpt"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "pretrain", help="обучить общего студента на режиме generic (или на --data)",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, NET_KEYS + TRAIN_KEYS + ("data", "frames", "width", "height", "out"))
    parser.set_defaults(handler=cmd_pretrain)

    parser = subparsers.add_parser(
        "distill", help="дообучить студента на gold truth пациента",
        description="Нужен датасет с gold/ (команды gen или gold) и, обычно, --init-checkpoint.",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, NET_KEYS + TRAIN_KEYS + ("data", "init_checkpoint", "out"))
    parser.set_defaults(handler=cmd_distill)


def _train(command: str, cfg, net, dataset, out: Path, quiet: bool) -> int:
    """Общий цикл: обучение, чекпоинт, лог эпох, запись в реестр"""
    show_progress = sys.stderr.isatty() and not quiet
    params = {**cfg.as_dict(), "param_count": net.param_count}
    with recorded_run(command, params, regime=dataset.provenance.get("regime"), seed=cfg.seed,
                      out_dir=str(out)) as run:
        train = pretrain if command == "pretrain" else fine_tune
        best, log = train(net, dataset, cfg.finetune_config(show_progress))
        save_checkpoint(best, out / CHECKPOINT_NAME)
        log.write_csv(out / "training_log.csv")
        (out / "training_summary.txt").write_text(log.summary_text())
        run["epochs"] = [
            {"epoch": r.epoch, "train_loss": r.train_loss, "val_loss": r.val_loss} for r in log.epochs
        ]
        run["results"] = {
            "epochs": len(log.epochs),
            "epoch_of_convergence": log.epoch_of_convergence,
            "best_val_loss": log.best_val_loss,
            "stopped_early": log.stopped_early,
            "wall_time_s": round(log.wall_time, 3),
        }

    print(f"✅ {command}: {len(log.epochs)} эпох, сходимость на эпохе {log.epoch_of_convergence}, "
          f"лучший val loss {log.best_val_loss}, время {log.wall_time / 60:.1f} мин")
    print(f"💾 Чекпоинт: {out / CHECKPOINT_NAME}")
    return 0


def cmd_pretrain(args) -> int:
    """Предобучение на общем домене"""
    cfg = load_run_config(args.config, vars(args))
    if not cfg.out:
        raise UsageError("укажите каталог результата: --out DIR")
    if cfg.data:
        dataset = load_dataset(require_dir(cfg.data, "--data"))
    else:
        dataset = make_regime_dataset("generic", cfg.seed, frames=cfg.frames, size=(cfg.width, cfg.height))
        dataset = generate_gold(dataset, AnalyticTeacher.from_dataset(dataset), threads=cfg.threads)
    out = ensure_output_dir(cfg.out, [cfg.data] if cfg.data else [])
    net = init(cfg.net_config())
    logger.info("Предобучение студента: %d параметров", net.param_count)
    return _train("pretrain", cfg, net, dataset, out, args.quiet)


def cmd_distill(args) -> int:
    """Дообучение студента на пациенте"""
    cfg = load_run_config(args.config, vars(args))
    data = require_dir(cfg.data, "--data")
    if not cfg.out:
        raise UsageError("укажите каталог результата: --out DIR")
    if cfg.init_checkpoint:
        net = load_checkpoint(require_file(cfg.init_checkpoint, "--init-checkpoint"))
    else:
        logger.warning("Нет --init-checkpoint: дообучение стартует со случайной инициализации")
        net = init(cfg.net_config())
    dataset = load_dataset(data)
    out = ensure_output_dir(cfg.out, [data])
    return _train("distill", cfg, net, dataset, out, args.quiet)
