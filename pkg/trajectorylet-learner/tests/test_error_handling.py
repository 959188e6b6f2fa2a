import asyncio

import pytest

from src.utils.concurrency import get_current_limits, limit_concurrency, update_limit
from src.utils.error_handler import (
    ErrorAccumulator,
    PipelineStageError,
    SkeletonFormatError,
    get_error_accumulator,
    safe_execute,
    stage_guard,
)


def test_stage_guard_tags_sync_failures():
    @stage_guard("clustering")
    def node(state):
        raise ValueError("K too large")

    with pytest.raises(PipelineStageError) as info:
        node({})
    assert info.value.stage == "clustering"
    assert isinstance(info.value.cause, ValueError)
    assert str(info.value) == "[clustering] ValueError: K too large"
    assert get_error_accumulator().get_errors()[0]["node"] == "clustering"


def test_stage_guard_tags_async_failures_once():
    @stage_guard("mining")
    async def inner(state):
        raise SkeletonFormatError("bad row", path="x.skeleton", frame=2)

    @stage_guard("aggregate")
    async def outer(state):
        return await inner(state)

    with pytest.raises(PipelineStageError) as info:
        asyncio.run(outer({}))
    assert info.value.stage == "mining"
    assert "frame=2" in str(info.value)


def test_stage_guard_passes_results_through():
    @stage_guard("encoding")
    async def node(state):
        return {"value": state["x"] + 1}

    assert asyncio.run(node({"x": 1})) == {"value": 2}


def test_safe_execute_records_and_returns_none():
    assert safe_execute(lambda: 1 / 0, context="ESVM a01 t0=3", node="mining") is None
    assert safe_execute(lambda x: x * 2, 4) == 8
    (entry,) = get_error_accumulator().get_errors()
    assert entry["node"] == "mining" and "ESVM a01 t0=3" in entry["error"]


def test_accumulator_summary():
    accumulator = ErrorAccumulator()
    assert not accumulator.has_errors()
    accumulator.add_error("clustering", "K clamped", {"k": 3})
    assert accumulator.has_errors()
    assert "1. [clustering] K clamped {'k': 3}" in accumulator.get_summary()
    accumulator.clear()
    assert accumulator.get_errors() == []


def test_limit_concurrency_bounds_parallel_tasks():
    previous = get_current_limits().get("mining")
    update_limit("mining", 2)
    active, peak = 0, 0

    async def task(name):
        nonlocal active, peak
        async with limit_concurrency("mining", name):
            active += 1
            peak = max(peak, active)
            await asyncio.sleep(0.01)
            active -= 1

    async def main():
        await asyncio.gather(*(task(f"t{i}") for i in range(6)))

    try:
        asyncio.run(main())
    finally:
        update_limit("mining", previous)
    assert peak == 2
