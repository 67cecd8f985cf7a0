"""
Подключение к базе данных реестра прогонов
"""

import logging
from contextlib import contextmanager
from typing import Optional

from sqlalchemy import create_engine, select
from sqlalchemy.orm import Session, sessionmaker

from .models import Base, PairMetric, Run, TrainingEpoch
from config import DATABASE_URL, DB_ECHO

logger = logging.getLogger(__name__)

# Создание движка
engine = create_engine(DATABASE_URL, echo=DB_ECHO, future=True)

# Фабрика сессий
session_maker = sessionmaker(engine, expire_on_commit=False, class_=Session)


def configure(url: str) -> None:
    """Переключить реестр на другую базу (тесты, --db)"""
    global engine
    engine = create_engine(url, echo=DB_ECHO, future=True)
    session_maker.configure(bind=engine)


def init_db():
    """Инициализация базы данных (создание таблиц)"""
    Base.metadata.create_all(engine)


@contextmanager
def get_session():
    """Получение сессии БД с коммитом по выходу"""
    with session_maker() as session:
        yield session
        session.commit()


def start_run(command: str, params: dict, regime: Optional[str] = None,
              seed: Optional[int] = None, out_dir: Optional[str] = None) -> int:
    """Создать запись о запуске, вернуть её id"""
    with get_session() as session:
        run = Run(command=command, regime=regime, seed=seed, params=params, out_dir=out_dir)
        session.add(run)
        session.flush()
        return run.id


def finish_run(run_id: int, status: str = "completed", results: Optional[dict] = None,
               pair_metrics: Optional[list] = None, epochs: Optional[list] = None) -> None:
    """
    Закрыть запуск

    Args:
        run_id: id из start_run
        status: completed или failed
        results: итоговые числа, дописываются в params["results"]
        pair_metrics: словари (split, pair_index, epe, ssim)
        epochs: словари (epoch, train_loss, val_loss)
    """
    with get_session() as session:
        run = session.get(Run, run_id)
        if run is None:
            logger.warning("Запуск %s не найден в реестре", run_id)
            return
        run.status = status
        if results:
            run.params = {**(run.params or {}), "results": results}
        for row in pair_metrics or []:
            session.add(PairMetric(run_id=run_id, **row))
        for row in epochs or []:
            session.add(TrainingEpoch(run_id=run_id, **row))


def recent_runs(limit: int = 20, command: Optional[str] = None) -> list[Run]:
    """Последние запуски, новые первыми"""
    with get_session() as session:
        query = select(Run).order_by(Run.id.desc()).limit(limit)
        if command:
            query = query.where(Run.command == command)
        return list(session.execute(query).scalars())


def run_details(run_id: int):
    """Запуск с его метриками и эпохами (None, если нет)"""
    with get_session() as session:
        run = session.get(Run, run_id)
        if run is None:
            return None
        metrics = list(session.execute(
            select(PairMetric).where(PairMetric.run_id == run_id).order_by(PairMetric.pair_index)
        ).scalars())
        epochs = list(session.execute(
            select(TrainingEpoch).where(TrainingEpoch.run_id == run_id).order_by(TrainingEpoch.epoch)
        ).scalars())
        return run, metrics, epochs


@contextmanager
def recorded_run(command: str, params: dict, regime: Optional[str] = None,
                 seed: Optional[int] = None, out_dir: Optional[str] = None):
    """Запуск в реестре: completed при успехе, failed при исключении"""
    run_id = start_run(command, params, regime=regime, seed=seed, out_dir=out_dir)
    record = {"id": run_id, "results": {}, "pair_metrics": [], "epochs": []}
    try:
        yield record
    except Exception:
        finish_run(run_id, "failed", record["results"])
        raise
    finish_run(run_id, "completed", record["results"], record["pair_metrics"], record["epochs"])
