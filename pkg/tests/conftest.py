import pytest

from decoupler import database
from decoupler.bath import BathParams
from decoupler.settings import get_settings


@pytest.fixture
def nv1():
    return BathParams(b=3.6, tau_c=25.0)


@pytest.fixture
def nv2():
    return BathParams(b=2.6, tau_c=23.0)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / 'out'
    path.mkdir()
    return path


@pytest.fixture
def registry(monkeypatch):
    """In-memory SQLite run registry; the module-level engine is restored afterwards."""
    monkeypatch.setattr(database, '_engine', None)
    database.configure('sqlite://')
    database.init_db()
    yield database
    database.SessionLocal.configure(bind=None)


@pytest.fixture
def registry_env(monkeypatch, tmp_path):
    """DATABASE_URL pointing at a file-backed SQLite registry."""
    monkeypatch.setattr(database, '_engine', None)
    monkeypatch.setenv('DATABASE_URL', f'sqlite:///{tmp_path / "runs.db"}')
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
    database.SessionLocal.configure(bind=None)


@pytest.fixture(autouse=True)
def _no_registry(monkeypatch):
    monkeypatch.delenv('DATABASE_URL', raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
