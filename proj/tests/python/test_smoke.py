import math

import numpy as np
import pytest

import hygnn


def tiny_config():
    cfg = hygnn.parse_config("N = 2\nK = 1\nbatch = 2\ncrop = 32\nlr = 0.001\nseed = 3\n")
    assert cfg.scales == 2 and cfg.mp_iterations == 1
    return cfg


def test_metrics_fixed_example():
    mae, mse = hygnn.metrics([10, 20], [12, 17])
    assert mae == pytest.approx(2.5, abs=1e-12)
    assert mse == pytest.approx(math.sqrt(6.5), abs=1e-12)


def test_density_sums_to_count():
    scene = hygnn.synth_scene(4)
    density = hygnn.density_map(scene)
    assert density.shape == (1, 8, 8)
    assert density.sum() == pytest.approx(scene.count, rel=1e-12)
    flipped = hygnn.density_map(hygnn.flip_horizontal(scene))
    assert np.array_equal(flipped, density[..., ::-1])


def test_scene_round_trip(tmp_path):
    image = np.random.default_rng(0).random((3, 16, 24))
    scene = hygnn.Scene(image, np.array([[3.5, 4.0], [20.0, 15.25]]))
    assert scene.count == 2
    hygnn.save_scene(scene, tmp_path / "s")
    back = hygnn.load_scene(tmp_path / "s.txt")
    assert np.allclose(back.image, image, atol=0.5 / 255)
    assert np.array_equal(back.points, scene.points)


def test_train_resume_and_infer(tmp_path):
    scenes = [hygnn.synth_scene(10 + i) for i in range(3)]
    straight = hygnn.Trainer(tiny_config(), scenes)
    full = straight.run(3)
    assert [r["step"] for r in full] == [1, 2, 3]

    first = hygnn.Trainer(tiny_config(), scenes)
    first.run(1)
    hygnn.save_checkpoint(first.checkpoint(), tmp_path / "m.ckpt")
    resumed = hygnn.Trainer(hygnn.load_checkpoint(tmp_path / "m.ckpt"), scenes)
    tail = resumed.run(2)
    assert [r["total"] for r in tail] == [r["total"] for r in full[1:]]
    assert resumed.checkpoint() == straight.checkpoint()

    model = hygnn.Model.from_checkpoint(straight.checkpoint())
    density, localization, count = model.infer(scenes[0].image)
    assert density.shape == localization.shape == (1, 8, 8)
    assert count == pytest.approx(density.sum(), rel=1e-12)
    mae, mse = model.evaluate(scenes)
    assert 0 <= mae <= mse


def test_errors():
    with pytest.raises(hygnn.ConfigError):
        hygnn.parse_config("nonsense = 1\n")
    with pytest.raises(hygnn.CheckpointError):
        hygnn.Model.from_checkpoint(b"nope")


def test_grad_check():
    passed, worst, rows = hygnn.grad_check()
    assert passed and worst < 1e-4 and rows > 0
