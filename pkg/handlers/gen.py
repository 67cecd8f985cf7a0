"""
Команды gen (синтетический датасет) и gold (разметка учителем)
"""

import logging

from db.database import recorded_run
from services.distill import generate_gold, load_dataset, make_teacher, save_dataset
from services.errors import UsageError
from services.runconfig import add_flags, load_run_config, require_dir
from services.synthdata import REGIMES, make_regime_dataset
from services.utils import ensure_output_dir

logger = logging.getLogger(__name__)

GEN_KEYS = ("regime", "seed", "illumination", "frames", "width", "height", "teacher", "noise_sigma",
            "threads", "out")
GOLD_KEYS = ("data", "teacher", "noise_sigma", "seed", "threads", "out")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "gen", help="сгенерировать синтетический датасет (кадры, truth/, gold/, manifest)",
        description="Режимы: " + ", ".join(REGIMES) + ". Учитель gold: analytic, noisy или none.",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, GEN_KEYS)
    parser.set_defaults(handler=cmd_gen)

    parser = subparsers.add_parser(
        "gold", help="generate_gold: разметить датасет учителем и записать копию в --out",
        description="Учителя: analytic, noisy, gold, opencv-dis, opencv-farneback, file:<каталог .flo>",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, GOLD_KEYS)
    parser.set_defaults(handler=cmd_gold)


def cmd_gen(args) -> int:
    """Сгенерировать датасет режима и записать его раскладку"""
    cfg = load_run_config(args.config, vars(args))
    if cfg.regime not in REGIMES:
        raise UsageError(f"неизвестный режим {cfg.regime!r}; попробуйте --regime {' | '.join(REGIMES)}")
    if not cfg.out:
        raise UsageError("укажите каталог результата: --out DIR")
    out = ensure_output_dir(cfg.out)

    with recorded_run("gen", cfg.as_dict(), regime=cfg.regime, seed=cfg.seed, out_dir=str(out)) as run:
        dataset = make_regime_dataset(cfg.regime, cfg.seed, illumination=cfg.illumination,
                                      frames=cfg.frames, size=(cfg.width, cfg.height))
        if cfg.teacher != "none":
            teacher = make_teacher(cfg.teacher, dataset, sigma=cfg.noise_sigma, seed=cfg.seed)
            dataset = generate_gold(dataset, teacher, threads=cfg.threads)
        save_dataset(dataset, out)
        run["results"] = {"frames": len(dataset.frames), "split": list(map(list, (
            dataset.split.train, dataset.split.val, dataset.split.test)))}

    print(f"✅ Датасет {cfg.regime} записан в {out}: {len(dataset.frames)} кадров, "
          f"train/val/test = {dataset.split.train} / {dataset.split.val} / {dataset.split.test}")
    return 0


def cmd_gold(args) -> int:
    """Разметить существующий датасет; входной каталог не меняется"""
    cfg = load_run_config(args.config, vars(args))
    data = require_dir(cfg.data, "--data")
    if not cfg.out:
        raise UsageError("укажите каталог результата: --out DIR")
    out = ensure_output_dir(cfg.out, [data])

    with recorded_run("gold", cfg.as_dict(), seed=cfg.seed, out_dir=str(out)) as run:
        dataset = load_dataset(data)
        teacher = make_teacher(cfg.teacher, dataset, sigma=cfg.noise_sigma, seed=cfg.seed)
        dataset = generate_gold(dataset, teacher, threads=cfg.threads)
        save_dataset(dataset, out)
        run["results"] = {"pairs": dataset.n_pairs, "teacher": teacher.name}

    print(f"✅ Gold truth ({teacher.name}) для {dataset.n_pairs} пар записан в {out}")
    return 0
