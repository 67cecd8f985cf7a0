"""
Команда eval: EPE* по тестовым парам, боксплоты и PDF отчёт
"""

import logging
import sys
from pathlib import Path

from db.database import recorded_run
from services.distill import evaluate, load_dataset, make_teacher
from services.errors import UsageError
from services.flowcore import FramePair, crop_to_multiple, flow_to_color, write_image
from services.metrics import boxplot_figure, summary_dict, write_metrics_csv, write_summary_json
from services.pdf_generator import generate_pdf_report
from services.runconfig import add_flags, load_run_config, require_dir, require_file
from services.studentnet import StudentNet, load_checkpoint, predict_flow
from services.utils import default_out_dir, ensure_output_dir, reduction_percent

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "eval", help="оценить студента (или учителя) по gold truth тестовой части",
        description="metrics.csv: model, dataset, pair_index, epe, ssim. "
                    "summary.json: среднее EPE*, поля боксплота, SSIM по моделям и датасетам.",
    )
    parser.add_argument("--config", help="файл key = value")
    add_flags(parser, ("data", "checkpoint", "teacher", "noise_sigma", "seed", "threads", "out"))
    parser.add_argument("--compare", metavar="PRE,POST", help="два чекпоинта: до и после дообучения")
    parser.add_argument("--flow-png", type=int, default=0, metavar="N",
                        help="записать цветовые карты потока для первых N тестовых пар")
    parser.set_defaults(handler=cmd_eval)


def _models(cfg, args) -> dict:
    """Имя -> фабрика модели по датасету; без чекпоинтов оценивается учитель --teacher"""
    if args.compare:
        paths = [p.strip() for p in args.compare.split(",")]
        if len(paths) != 2:
            raise UsageError("--compare ожидает два чекпоинта через запятую: PRE,POST")
        pre, post = (load_checkpoint(require_file(p, "--compare")) for p in paths)
        return {"pre": lambda ds: pre, "post": lambda ds: post}
    if cfg.checkpoint:
        net = load_checkpoint(require_file(cfg.checkpoint, "--checkpoint"))
        return {"student": lambda ds: net}
    if cfg.teacher:
        return {cfg.teacher: lambda ds: make_teacher(cfg.teacher, ds, sigma=cfg.noise_sigma, seed=cfg.seed)}
    raise UsageError("укажите --checkpoint, --compare PRE,POST или --teacher")


def _write_flow_images(model, dataset, name: str, count: int, out: Path) -> None:
    for index in list(dataset.indices("test"))[:count]:
        pair = dataset.pair(index)
        if isinstance(model, StudentNet):
            m = model.config.multiple
            pair = FramePair(crop_to_multiple(pair.first, m), crop_to_multiple(pair.second, m))
            flow = predict_flow(model, pair)
        else:
            flow = model.estimate(pair, index)
        write_image(flow_to_color(flow), out / "flows" / f"{name}_{index:06d}.png")


def cmd_eval(args) -> int:
    """Оценка одной или двух моделей на одном или нескольких датасетах (через запятую)"""
    cfg = load_run_config(args.config, vars(args))
    if not cfg.data:
        raise UsageError("укажите датасет: --data DIR[,DIR...]")
    data_dirs = [require_dir(d.strip(), "--data") for d in cfg.data.split(",")]
    out = ensure_output_dir(Path(cfg.out) if cfg.out else default_out_dir("eval"), data_dirs)
    models = _models(cfg, args)
    show_progress = sys.stderr.isatty() and not args.quiet

    with recorded_run("eval", {**cfg.as_dict(), "compare": args.compare}, seed=cfg.seed,
                      out_dir=str(out)) as run:
        datasets = {d.name: load_dataset(d) for d in data_dirs}
        rows, summary, groups = [], {}, {}
        for model_name, factory in models.items():
            all_epe, all_ssim = [], []
            summary[model_name] = {}
            for ds_name, dataset in datasets.items():
                model = factory(dataset)
                result = evaluate(model, dataset, threads=cfg.threads, show_progress=show_progress)
                summary[model_name][ds_name] = summary_dict(result.epe, result.ssim)
                for row in result.rows():
                    rows.append({"model": model_name, "dataset": ds_name, **row})
                run["pair_metrics"] += [
                    {"split": f"{model_name}:{ds_name}", "pair_index": i, "epe": e, "ssim": s}
                    for i, e, s in zip(result.pair_indices, result.epe, result.ssim)
                ]
                groups[ds_name if len(models) == 1 else f"{model_name}:{ds_name}"] = result.epe
                all_epe += result.epe
                all_ssim += result.ssim
                if args.flow_png:
                    _write_flow_images(model, dataset, f"{model_name}_{ds_name}", args.flow_png, out)
            summary[model_name]["all"] = summary_dict(all_epe, all_ssim)

        reduction = None
        if args.compare:
            reduction = reduction_percent(summary["pre"]["all"]["mean_epe"], summary["post"]["all"]["mean_epe"])
            summary["reduction_percent"] = reduction

        write_metrics_csv(rows, out / "metrics.csv")
        write_summary_json(summary, out / "summary.json")
        boxplot_figure(groups, out / "boxplot.png", with_all=len(models) == 1)
        generate_pdf_report(
            {name: summary[name]["all"] for name in models},
            dataset_name=", ".join(datasets),
            boxplot_path=str(out / "boxplot.png"),
            reduction=reduction,
            output_path=str(out / "report.pdf"),
        )
        run["results"] = {name: summary[name]["all"]["mean_epe"] for name in models}
        if reduction is not None:
            run["results"]["reduction_percent"] = reduction

    for name in models:
        print(f"📊 {name}: средний EPE* {summary[name]['all']['mean_epe']:.4f}")
    if reduction is not None:
        print(f"📉 Снижение EPE* после дообучения: {reduction:.1f}%")
    print(f"📄 Отчёт: {out / 'report.pdf'}")
    return 0
