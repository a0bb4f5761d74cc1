import logging

import numpy as np
import pytest

from parbo.afopt import BoxDomain
from parbo.exceptions import ConfigurationError, DegenerateReferenceError, InvalidArgumentError
from parbo.partition import (
    PartitionScheme, hyperboxes, levelset_custom, levelset_uniform, variable_partitions,
)


class Square:
    def predict(self, X):
        return np.sum(np.atleast_2d(X) ** 2, axis=1)


class Flat:
    def predict(self, X):
        return np.zeros(len(np.atleast_2d(X)))


@pytest.mark.parametrize("phi, expected", [
    (0.0, [(0.0, 0.5), (0.5, 1.0)]),
    (0.5, [(0.0, 0.75), (0.25, 1.0)]),
    (1.0, [(0.0, 1.0), (0.0, 1.0)]),
])
def test_hyperbox_closed_form(phi, expected):
    s = hyperboxes(BoxDomain.unit(1), 2, phi)
    got = [(b.lower[0], b.upper[0]) for b in s.regions]
    np.testing.assert_allclose(got, expected)


def test_hyperbox_count_and_cover(rng):
    s = hyperboxes(BoxDomain([303, 303], [423, 423]), 2, 0.5)
    assert s.count == 4
    X = rng.uniform(303, 423, (500, 2))
    assert s.box_members(X).any(axis=0).all()
    with pytest.raises(InvalidArgumentError):
        hyperboxes(BoxDomain.unit(1), 2, 1.5)


def test_levelset_uniform_square():
    s = levelset_uniform(Square(), BoxDomain([-1.0], [1.0]), 2, probe_count=256, rng=0)
    np.testing.assert_allclose(s.thresholds, [0.0, 0.5, 1.0], atol=1e-6)
    np.testing.assert_array_equal(s.band_index([0.1, 0.5, 0.9]), [0, 0, 1])
    assert np.isinf(s.regions[0].alpha_lo) and np.isinf(s.regions[-1].alpha_hi)


def test_levelset_flat_reference():
    with pytest.raises(DegenerateReferenceError):
        levelset_uniform(Flat(), BoxDomain.unit(2), 3, probe_count=64, rng=0)
    assert levelset_uniform(Flat(), BoxDomain.unit(2), 1, probe_count=64, rng=0).count == 1


def test_levelset_custom_validation():
    with pytest.raises(InvalidArgumentError):
        levelset_custom(Square(), BoxDomain.unit(1), [0.0, 0.5, 0.5])
    s = levelset_custom(Square(), BoxDomain.unit(1), [-np.inf, 0.3, np.inf])
    assert s.count == 2


def test_variable_partition_from_ard():
    s = variable_partitions([[0.145, 1000.0], [0.498, 0.399]])
    assert s.regions == [(0,), (1,)]


def test_variable_partition_conflict_rule():
    # both prefer variable 0; it stands out more for subsystem 1
    s = variable_partitions([[0.1, 1.0], [0.2, 10.0]])
    assert s.regions == [(1,), (0,)]


def test_variable_partition_exact_tie_logged(caplog):
    with caplog.at_level(logging.WARNING):
        s = variable_partitions([[0.5, 1.0], [0.5, 1.0]])
    assert s.regions == [(0,), (1,)]
    assert "ties" in caplog.text


def test_variable_partition_leftovers_and_limits():
    s = variable_partitions([[0.1, 1.0, 5.0], [1.0, 0.1, 0.2]])
    assert sorted(sum(s.regions, ())) == [0, 1, 2]
    assert s.regions == [(0,), (1, 2)]
    with pytest.raises(ConfigurationError):
        variable_partitions([[1.0], [1.0]])


def test_scheme_rejects_overlapping_blocks():
    with pytest.raises(ConfigurationError):
        PartitionScheme("variable", [(0, 1), (1,)])
