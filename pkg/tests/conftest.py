import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
os.environ.setdefault("SNNFC_DATA", str(ROOT / "data"))

from snnfc import uci  # noqa: E402

# criterion id -> (status, detail); filled by the acceptance suite
RESULTS: dict[str, tuple[str, str]] = {}


def need_data(name):
    if not uci.available(name):
        pytest.skip(f"{name} raw files not present in {uci.data_dir()}")


@pytest.fixture(scope="session")
def car_subset():
    """First 50 Car training records (values, labels, schema)."""
    need_data("car")
    from snnfc.dataset import split
    ds = uci.load("car")
    tr, _ = split(ds)
    return ds.values[tr][:50], ds.labels[tr][:50], ds.schema


@pytest.fixture
def record():
    """record(cid, ok, detail): log a criterion outcome, then assert it."""
    def _record(cid, ok, detail):
        RESULTS[cid] = ("PASS" if ok else "FAIL", detail)
        assert ok, f"criterion {cid}: {detail}"
    return _record


def criterion_data(cid, *names):
    """Skip a criterion, and log it as skipped, when its raw files are missing."""
    missing = [n for n in names if not uci.available(n)]
    if missing:
        reason = f"{', '.join(missing)} raw files not present in {uci.data_dir()}"
        RESULTS[cid] = ("SKIP", reason)
        pytest.skip(reason)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(RESULTS, key=lambda c: [int(p) if p.isdigit() else p for p in c.replace("-", ".").split(".")]):
        status, detail = RESULTS[cid]
        tr.write_line(f"criterion {cid:<8} {status:<5} {detail}")
