import numpy as np
import pytest
from scipy.stats import kstest

from sorosense.plant.manipulator import GapModel, SoftManipulator
from sorosense.proprioception.dataset import (
    CSV_COLUMNS,
    Dataset,
    gen_load_dataset,
    gen_real_dataset,
    gen_sim_dataset,
    pressure_grid,
)
from sorosense.sensing.sensors import SensorNoise, SensorSuite
from sorosense.utils.errors import DatasetError, DomainError


def test_sim_dataset_is_reproducible(plant, quiet_suite):
    a = gen_sim_dataset(plant, quiet_suite, n=15, seed=4)
    b = gen_sim_dataset(plant, SensorSuite(noise=SensorNoise.noiseless()), n=15, seed=4)
    assert len(a) == 15
    assert a.provenance == "sim"
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.sensors, b.sensors)
    assert np.all(np.abs(a.q) <= 40.0)


def test_sim_dataset_reads_without_noise(plant):
    noisy = SensorSuite(noise=SensorNoise(seed=1))
    data = gen_sim_dataset(plant, noisy, n=5, seed=2)
    clean = gen_sim_dataset(plant, SensorSuite(noise=SensorNoise.noiseless()), n=5, seed=2)
    np.testing.assert_array_equal(data.sensors, clean.sensors)


def test_sim_dataset_rejects_gap(plant):
    with pytest.raises(DomainError):
        gen_sim_dataset(plant, SensorSuite(gap=GapModel.from_seed(1)), n=5)


def test_split_sizes(sim_dataset):
    data = sim_dataset.subset(np.arange(25))
    train, val, test = data.split_indices()
    assert (len(train), len(val), len(test)) == (18, 5, 2)
    assert sorted(np.concatenate([train, val, test]).tolist()) == list(range(25))
    again = data.split_indices()
    np.testing.assert_array_equal(again[0], train)


def test_pressure_grid():
    grid = pressure_grid(3)
    assert grid.shape == (729, 6)
    assert set(np.unique(grid)) == {-40.0, 0.0, 40.0}
    np.testing.assert_array_equal(pressure_grid(1), np.zeros((1, 6)))
    with pytest.raises(DomainError):
        pressure_grid(0)


def test_real_dataset_uses_gap():
    gap = GapModel.from_seed(7)
    plant = SoftManipulator(gap=gap)
    data = gen_real_dataset(plant, gap, SensorSuite(gap=gap, noise=SensorNoise(seed=0)), levels=2, seed=1)
    assert len(data) == 64
    assert data.provenance == "virtual-real"

    _, ideal = SoftManipulator().forward(data.q[5])
    assert np.linalg.norm(data.poses[5, :3] - ideal.translation) > 0.01


def test_load_dataset_records_payload():
    gap = GapModel.from_seed(7)
    data = gen_load_dataset(SoftManipulator(gap=gap), gap, SensorSuite(gap=gap), 115.0, n=4, seed=0)
    assert np.all(data.load_g == 115.0)


def test_workspace_diagonal(sim_dataset):
    lo, hi = sim_dataset.workspace_extent
    assert sim_dataset.workspace_diagonal == pytest.approx(np.linalg.norm(hi - lo))
    assert sim_dataset.workspace_diagonal > 50.0


def test_csv_file(tmp_path, sim_dataset):
    data = sim_dataset.subset(np.arange(10))
    path = tmp_path / "data.csv"
    data.to_csv(path, "config=abc seed=0 version=1.0.0")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# config=abc seed=0 version=1.0.0"
    assert lines[2] == ",".join(CSV_COLUMNS)

    loaded = Dataset.from_csv(path)
    assert loaded.provenance == "sim"
    assert loaded.seed == sim_dataset.seed
    np.testing.assert_allclose(loaded.sensors, data.sensors, rtol=1e-12)
    np.testing.assert_allclose(loaded.poses, data.poses, rtol=1e-12, atol=1e-12)


def test_csv_errors_report_line(tmp_path, sim_dataset):
    path = tmp_path / "data.csv"
    sim_dataset.subset(np.arange(3)).to_csv(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[3] = lines[3].replace(",", ",x", 1)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    # строки 1-2: комментарий и заголовок
    with pytest.raises(DatasetError, match="строка 4"):
        Dataset.from_csv(path)

    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(DatasetError):
        Dataset.from_csv(path)


def test_inconsistent_arrays():
    with pytest.raises(DatasetError):
        Dataset(np.zeros(2), np.zeros((2, 6)), np.zeros((3, 24)), np.zeros((2, 6)))
    with pytest.raises(DatasetError):
        Dataset.from_samples([])


def test_sim_pressures_are_uniform(sim_dataset):
    assert kstest(sim_dataset.q.ravel(), "uniform", args=(-40.0, 80.0)).pvalue > 1e-3


def test_sim_dataset_appends_pressure_grid(plant, quiet_suite):
    data = gen_sim_dataset(plant, quiet_suite, n=7, seed=4, grid_levels=2)
    assert len(data) == 7 + 2 ** 6
    np.testing.assert_array_equal(data.q[7:], pressure_grid(2))
    plain = gen_sim_dataset(plant, SensorSuite(noise=SensorNoise.noiseless()), n=7, seed=4)
    np.testing.assert_array_equal(data.q[:7], plain.q)
    with pytest.raises(DomainError):
        gen_sim_dataset(plant, quiet_suite, n=7, grid_levels=-1)


def test_generators_report_progress(plant, quiet_suite):
    ticks = []
    gen_sim_dataset(plant, quiet_suite, n=6, seed=1, grid_levels=1, progress=lambda: ticks.append("sim"))
    gap = GapModel.from_seed(7)
    gapped = SoftManipulator(gap=gap)
    gen_real_dataset(gapped, gap, SensorSuite(gap=gap), levels=1, progress=lambda: ticks.append("real"))
    gen_load_dataset(gapped, gap, SensorSuite(gap=gap), 115.0, n=3, progress=lambda: ticks.append("load"))
    assert ticks == ["sim"] * 7 + ["real"] + ["load"] * 3
