"""
SQLAlchemy модели реестра прогонов
"""

from sqlalchemy import Column, Integer, String, Float, DateTime, ForeignKey, JSON, func, Index
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class Run(Base):
    """Один запуск команды CLI"""
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    created_at = Column(DateTime, default=func.now())
    command = Column(String, nullable=False)  # gen, gold, pretrain, distill, eval, track, bench
    regime = Column(String, nullable=True)
    seed = Column(Integer, nullable=True)
    status = Column(String, default="running")  # running, completed, failed
    params = Column(JSON, nullable=False, default=dict)  # параметры и итоговые числа
    out_dir = Column(String, nullable=True)

    pair_metrics = relationship("PairMetric", back_populates="run", cascade="all, delete-orphan")
    epochs = relationship("TrainingEpoch", back_populates="run", cascade="all, delete-orphan")


class PairMetric(Base):
    """EPE* и SSIM одной тестовой пары"""
    __tablename__ = "pair_metrics"
    __table_args__ = (
        Index('idx_run_split', 'run_id', 'split'),
    )

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    split = Column(String, nullable=False)  # обычно test
    pair_index = Column(Integer, nullable=False)
    epe = Column(Float, nullable=False)
    ssim = Column(Float, nullable=True)

    run = relationship("Run", back_populates="pair_metrics")


class TrainingEpoch(Base):
    """Запись эпохи обучения"""
    __tablename__ = "training_epochs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    epoch = Column(Integer, nullable=False)
    train_loss = Column(Float, nullable=False)
    val_loss = Column(Float, nullable=True)

    run = relationship("Run", back_populates="epochs")
