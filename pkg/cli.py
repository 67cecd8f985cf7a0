"""
Главный файл для запуска FlowDistill из командной строки
"""

import argparse
import logging
import sys

from config import DATABASE_URL, LOG_LEVEL
from db import database
from handlers import bench, distill, evaluate, gen, history, track
from services.errors import FlowDistillError, UsageError

# Настройка логирования
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Ошибки разбора аргументов превращаются в UsageError (код выхода 1)"""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="flowdistill",
        description="Дистилляция оптического потока: учитель -> быстрый студент для одного пациента",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="подробный лог (DEBUG)")
    parser.add_argument("-q", "--quiet", action="store_true", help="только предупреждения и ошибки")
    parser.add_argument("--db", default=None, help=f"URL реестра прогонов (по умолчанию {DATABASE_URL})")
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    # Подключение команд
    for module in (gen, distill, evaluate, track, bench, history):
        module.register(subparsers)
    return parser


def main(argv=None) -> int:
    """Разбор аргументов, инициализация реестра и запуск команды"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return UsageError.exit_code
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        elif args.quiet:
            logging.getLogger().setLevel(logging.WARNING)

        if args.db:
            database.configure(args.db)
        database.init_db()
        return args.handler(args) or 0
    except FlowDistillError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Остановлено пользователем")
        return 130


if __name__ == "__main__":
    sys.exit(main())
