import json

import pytest

import ikdnav

WORLD = {
    "schema": "ikd-world",
    "version": 1,
    "terrain": {
        "nominal": {"grip": 1.0, "roughness": 0.0, "drag": 0.0},
        "patches": [
            {
                "polygon": [[2.0, -2.0], [6.0, -2.0], [6.0, 2.0], [2.0, 2.0]],
                "grip": 0.7,
                "roughness": 0.4,
                "drag": 0.1,
            }
        ],
    },
    "track": {
        "waypoints": [[0.0, 0.0], [8.0, 0.0], [8.0, 6.0], [0.0, 6.0]],
        "closed": True,
        "boundaries": [[[-2.0, -2.0], [-2.0, 8.0]]],
        "turn_gates": [
            {
                "label": "T1",
                "entry": [[7.0, -1.0], [7.0, 1.0]],
                "exit": [[7.0, 1.0], [9.0, 1.0]],
            }
        ],
    },
}


def test_world_roundtrip():
    world = ikdnav.parse_world(json.dumps(WORLD))
    assert world.num_patches == 1
    assert world.num_turn_gates == 1
    assert world.plan_length == pytest.approx(28.0)
    assert ikdnav.validate_world(world) == []
    again = ikdnav.parse_world(ikdnav.world_to_json(world))
    assert ikdnav.world_hash(again) == ikdnav.world_hash(world)


def test_world_diagnostics():
    broken = json.loads(json.dumps(WORLD))
    broken["track"]["turn_gates"][0]["entry"] = [[20.0, 20.0], [21.0, 20.0]]
    world = ikdnav.parse_world(json.dumps(broken))
    messages = ikdnav.validate_world(world)
    assert any("entry gate" in m for m in messages)


def test_collect_and_forward():
    world = ikdnav.parse_world(json.dumps(WORLD))
    dataset = ikdnav.collect(world, duration=20.0, seed=7, arena_radius=30.0)
    assert len(dataset) > 100
    labels = dataset.labels()
    assert labels.shape == (len(dataset), 4)
    assert (labels[:, 0] >= 0.2).all()
    windows = dataset.windows()
    assert windows.shape == (len(dataset), 600)

    same = ikdnav.collect(world, duration=20.0, seed=7, arena_radius=30.0)
    assert (same.labels() == labels).all()


def test_train_and_benchmark_small():
    world = ikdnav.parse_world(json.dumps(WORLD))
    dataset = ikdnav.collect(world, duration=60.0, seed=3, arena_radius=30.0)
    result = ikdnav.train(dataset, ablated=True, epochs=2, seed=5)
    assert not result.params.use_encoder
    curve = result.curve()
    assert len(curve) == 3

    v, c = ikdnav.forward(result.params, 1.0, 0.3)
    assert abs(v) < 100.0 and abs(c) < 100.0

    report = json.loads(
        ikdnav.run_benchmark(world, modes=["baseline"], speeds=[1.0], laps_per_cell=1, seed=2)
    )
    assert report["overall"][0]["mode"] == "baseline"
    assert report["overall"][0]["laps"] == 1
