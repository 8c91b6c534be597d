import pytest
from pydantic import ValidationError

from src.core.settings import DEFAULT_WORKERS, THREADS_ENV, RunSettings, worker_count
from src.utils.parallel import map_ordered


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("", DEFAULT_WORKERS),
        ("3", 3),
        ("abc", DEFAULT_WORKERS),
        ("0", DEFAULT_WORKERS),
    ],
)
def test_worker_count_from_env(monkeypatch, raw, expected):
    monkeypatch.setenv(THREADS_ENV, raw)
    assert worker_count() == expected


def test_settings_defaults(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    settings = RunSettings.from_flags()
    assert settings.tol == 1e-9
    assert settings.budget == 10_000
    assert settings.seed == 42
    assert settings.workers == DEFAULT_WORKERS


def test_settings_reject_bad_flags():
    with pytest.raises(ValidationError):
        RunSettings.from_flags(tol=-1.0)
    with pytest.raises(ValidationError):
        RunSettings.from_flags(budget=0)


def test_map_ordered_keeps_input_order():
    def work(i):
        return i * i

    assert map_ordered(work, range(20), max_workers=4) == [i * i for i in range(20)]
    assert map_ordered(work, [], max_workers=4) == []


def test_map_ordered_reraises():
    def work(i):
        if i == 3:
            raise KeyError(i)
        return i

    with pytest.raises(KeyError):
        map_ordered(work, range(5), max_workers=2)
