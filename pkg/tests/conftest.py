"""
Общие фикстуры тестов
"""
import numpy as np
import pytest

from sorosense.neuralnet.mlp import MLP, Normalizer
from sorosense.plant.manipulator import SoftManipulator
from sorosense.proprioception.dataset import gen_sim_dataset
from sorosense.proprioception.predictor import PosePredictor
from sorosense.sensing.sensors import SensorNoise, SensorSuite


@pytest.fixture
def plant():
    return SoftManipulator()


@pytest.fixture
def quiet_suite():
    return SensorSuite(noise=SensorNoise.noiseless())


@pytest.fixture(scope="session")
def sim_dataset():
    return gen_sim_dataset(SoftManipulator(), SensorSuite(noise=SensorNoise.noiseless()), n=300, seed=1)


@pytest.fixture(scope="session")
def linear_predictor(sim_dataset):
    """Однослойная сеть со случайными весами: гладкое отображение сенсоры → поза"""
    net = MLP.create([24, 6], seed=3)
    net.normalizer_in = Normalizer.fit(sim_dataset.sensors)
    return PosePredictor(net)
