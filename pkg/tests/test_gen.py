import numpy as np
import pytest

from hybridclust.gen import KINDS, generate
from hybridclust.metric import instance_to_dict


@pytest.mark.parametrize("kind", KINDS)
def test_generators_seeded(kind):
    a, b = generate(kind, 7, 4, seed=11), generate(kind, 7, 4, seed=11)
    assert instance_to_dict(a) == instance_to_dict(b)
    assert instance_to_dict(a) != instance_to_dict(generate(kind, 7, 4, seed=12))
    assert a.space.n == 7 and a.space.m == 4


def test_generator_errors():
    with pytest.raises(ValueError):
        generate("nope", 3, 3)
    with pytest.raises(ValueError):
        generate("euclidean-uniform", 0, 3)
    with pytest.raises(ValueError):
        generate("euclidean-uniform", 3, 3, r=-1)


def test_planted_has_facility_near_each_center():
    inst = generate("euclidean-planted", 30, 5, k=3, seed=2)
    assert np.isfinite(inst.space.client_facility).all()
