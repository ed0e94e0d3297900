import enum

from sqlalchemy import JSON, Column, DateTime, Integer, String, Text, func

from .database import Base


class RunStatus(str, enum.Enum):
    running = 'running'
    succeeded = 'succeeded'
    failed = 'failed'


class Run(Base):
    __tablename__ = 'runs'
    id = Column(String, primary_key=True)
    task = Column(String, index=True, nullable=False)
    # SHA-256 of the resolved config JSON
    config_hash = Column(String(64), index=True, nullable=False)
    seed = Column(Integer, nullable=False)
    threads = Column(Integer, nullable=False, default=1)
    out_dir = Column(String, nullable=False)
    status = Column(String, default=RunStatus.running.value)
    exit_code = Column(Integer, nullable=True)
    summary = Column(JSON, nullable=True)
    error = Column(Text, nullable=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    finished_at = Column(DateTime(timezone=True), nullable=True)
