from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool

from .settings import get_settings

Base = declarative_base()

_engine: Engine | None = None
SessionLocal = sessionmaker(autoflush=False, autocommit=False, future=True)


def make_engine(url: str) -> Engine:
    if url.startswith('sqlite'):
        # in-memory databases must share one connection across threads
        if url in ('sqlite://', 'sqlite:///:memory:'):
            return create_engine(url, future=True, connect_args={'check_same_thread': False}, poolclass=StaticPool)
        return create_engine(url, future=True, connect_args={'check_same_thread': False})
    # pool_pre_ping drops connections the server closed while idle
    return create_engine(url, future=True, pool_pre_ping=True)


def configure(url: str | None = None) -> Engine | None:
    """Bind the session factory to ``url`` (default: DATABASE_URL). Returns None when the registry is off."""
    global _engine
    url = url or get_settings().database_url
    if not url:
        _engine = None
        return None
    _engine = make_engine(url)
    SessionLocal.configure(bind=_engine)
    return _engine


def registry_enabled() -> bool:
    return _engine is not None


def init_db():
    # import models here to ensure they are registered on the metadata
    from . import models  # noqa: F401
    if _engine is not None:
        Base.metadata.create_all(bind=_engine)


def get_session() -> Session:
    if _engine is None:
        raise RuntimeError('run registry is disabled; set DATABASE_URL')
    return SessionLocal()
