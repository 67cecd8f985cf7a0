"""
Команда history: просмотр реестра прогонов
"""

import logging

from db.database import recent_runs, run_details
from services.errors import DataError

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("history", help="последние прогоны или детали одного прогона")
    parser.add_argument("--limit", type=int, default=20, help="сколько прогонов показать")
    parser.add_argument("--command", dest="filter_command", help="только эта команда (gen, distill, eval ...)")
    parser.add_argument("--run", type=int, help="id прогона для подробностей")
    parser.set_defaults(handler=cmd_history)


def cmd_history(args) -> int:
    """Показать результаты прошлых запусков"""
    if args.run is not None:
        details = run_details(args.run)
        if details is None:
            raise DataError(f"прогон {args.run} не найден")
        run, metrics, epochs = details
        print(f"📋 Прогон #{run.id}: {run.command} [{run.status}] {run.created_at:%d.%m.%Y %H:%M}")
        print(f"   regime={run.regime} seed={run.seed} out={run.out_dir}")
        for key, value in (run.params or {}).get("results", {}).items():
            print(f"   {key}: {value}")
        if epochs:
            print(f"   эпох: {len(epochs)}, последняя train loss {epochs[-1].train_loss:.5f}")
        if metrics:
            mean = sum(m.epe for m in metrics) / len(metrics)
            print(f"   пар с метриками: {len(metrics)}, средний EPE* {mean:.4f}")
        return 0

    runs = recent_runs(args.limit, args.filter_command)
    if not runs:
        print("❌ Прогонов пока нет. Начните с команды gen")
        return 0
    for run in runs:
        print(f"#{run.id:<4} {run.created_at:%d.%m.%Y %H:%M}  {run.command:<9} {run.status:<9} "
              f"{run.regime or '-':<12} {run.out_dir or ''}")
    return 0
