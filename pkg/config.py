"""
Конфигурация приложения
"""

import os
from dotenv import load_dotenv

load_dotenv()

# База прогонов (SQLite по умолчанию, легко заменить на PostgreSQL)
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///./flowdistill.db")
DB_ECHO = os.getenv("DB_ECHO", "0") == "1"

# Логирование
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Параллельные секции (генерация gold, оценка)
THREADS = int(os.getenv("FLOWDISTILL_THREADS", "1"))

DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "7"))

# Куда складывать PDF отчёты, если --out не задан
REPORTS_DIR = os.getenv("REPORTS_DIR", "reports")

# Стандартные размеры настольного масштаба
FRAME_WIDTH = 256
FRAME_HEIGHT = 192
CROP_MULTIPLE = 64
