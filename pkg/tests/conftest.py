import asyncio
import contextlib
import os
import threading
from pathlib import Path

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=1000, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def tiny_embedding():
    """Three references on the axes; the worked example used across tests."""
    from aumap import ReferenceEmbedding

    return ReferenceEmbedding(
        inputs=[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]],
        projections=[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    )


_acceptance_lines = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    failed_setup = report.when == "setup" and not report.passed
    if item.module.__name__.endswith("test_acceptance") and (report.when == "call" or failed_setup):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        status = "PASS" if report.passed else "FAIL"
        _acceptance_lines.append(f"{status}  {doc}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@contextlib.contextmanager
def running_server(projector):
    """Run a ProjectionServer on an ephemeral port in a background thread."""
    from aumap.server import ProjectionServer

    loop = asyncio.new_event_loop()
    srv = ProjectionServer(projector, "127.0.0.1", 0)
    address = loop.run_until_complete(srv.start())
    thread = threading.Thread(target=loop.run_forever, daemon=True)
    thread.start()
    try:
        yield address
    finally:
        asyncio.run_coroutine_threadsafe(srv.shutdown(), loop).result(10)
        loop.call_soon_threadsafe(loop.stop)
        thread.join(10)
        loop.close()


@pytest.fixture
def tcp_server():
    return running_server
