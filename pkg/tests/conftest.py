from __future__ import annotations

from pathlib import Path

import pytest

from statesel.arrangement import Grid

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def sample_grid() -> Grid:
    # back row: ball, toothpaste, (E), (G), doughnut
    # front row: bottle, orange, water bottle, soda, apple
    return Grid.from_placements({
        "ball": (1, 0), "toothpaste": (1, 1), "doughnut": (1, 4),
        "bottle": (0, 0), "orange": (0, 1), "water bottle": (0, 2),
        "soda": (0, 3), "apple": (0, 4),
    })


@pytest.fixture(scope="session")
def published_listing() -> str:
    """Published full state description of the sample grid (final period omitted)."""
    return (ROOT / "tests" / "data" / "full_listing.txt").read_text(encoding="utf-8").strip()


@pytest.fixture(scope="session")
def trained():
    """Value model trained on 25 synthesized demonstrations (default config)."""
    import numpy as np

    from statesel.actor import arrangement_actor
    from statesel.config import Config
    from statesel.harness import generate_demonstrations
    from statesel.learning import collect_value_dataset, train
    from statesel.value import Featurizer, LinearValueModel

    import time

    start = time.perf_counter()
    cfg = Config()
    rng = np.random.default_rng(cfg.rng_seed)
    demos = generate_demonstrations(cfg.n_demos, rng, cfg.demo_targets, cfg.n_objects, "train")
    steps = [s for d in demos for s in d]
    actor = arrangement_actor(cfg.boost, cfg.penalty)
    dataset = collect_value_dataset(steps, actor, cfg, rng)
    model, report = train(LinearValueModel(Featurizer(cfg.hash_bits)), dataset, cfg, rng)
    return {"config": cfg, "steps": steps, "actor": actor, "dataset": dataset,
            "model": model, "report": report, "seconds": time.perf_counter() - start}


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
