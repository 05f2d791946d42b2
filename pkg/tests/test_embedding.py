import numpy as np
import pytest

from cec.embedding import EmbedderSpec, embed, from_matrix, identity, new_random_projection
from cec.errors import ConfigError, ContractViolation


def test_projection_is_deterministic():
    a = new_random_projection(13, 8, rng_seed=7)
    b = new_random_projection(13, 8, rng_seed=7)
    assert a.matrix.shape == (8, 13)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, new_random_projection(13, 8, rng_seed=8).matrix)


def test_projection_entry_moments():
    e = new_random_projection(36, 16, rng_seed=3)
    m = e.matrix.ravel()
    se = np.sqrt(1.0 / 16) / np.sqrt(m.size)
    assert abs(m.mean()) < 4 * se
    # variance 1/16 with a generous chi-square band for 576 draws
    assert 0.8 / 16 < m.var() < 1.2 / 16


def test_unit_variance_flag():
    e = new_random_projection(200, 100, rng_seed=1, unit_variance=True)
    assert 0.9 < e.matrix.var() < 1.1


def test_projection_must_reduce():
    with pytest.raises(ConfigError):
        new_random_projection(4, 8, rng_seed=0)


def test_identity_copies():
    e = identity(2)
    x = np.array([1.0, -2.0])
    y = embed(e, x)
    np.testing.assert_array_equal(y, x)
    y[0] = 9.0
    assert x[0] == 1.0


def test_injected_matrix():
    e = from_matrix([[2.0, 3.0]])
    np.testing.assert_array_equal(embed(e, [1.0, 1.0]), [5.0])


def test_dimension_mismatch():
    with pytest.raises(ContractViolation):
        embed(identity(3), [1.0, 2.0])
    with pytest.raises(ContractViolation):
        embed(new_random_projection(5, 2, 0), [1.0, 2.0])


def test_linearity(rng):
    e = new_random_projection(24, 16, rng_seed=11)
    for _ in range(50):
        x, y = rng.normal(size=24), rng.normal(size=24)
        a, b = rng.normal(size=2)
        lhs = e(a * x + b * y)
        rhs = a * e(x) + b * e(y)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


def test_distance_distortion_mean(rng):
    e = new_random_projection(24, 16, rng_seed=5)
    ratios = []
    for _ in range(100):
        x = rng.normal(size=24)
        u = rng.normal(size=24)
        y = x + u / np.linalg.norm(u)
        ratios.append(np.linalg.norm(e(x) - e(y)) / np.linalg.norm(x - y))
    assert 0.75 <= np.mean(ratios) <= 1.25


def test_spec_builds_and_checks_dims():
    assert EmbedderSpec().build(3).output_dim == 3
    spec = EmbedderSpec("random_projection", output_dim=2, rng_seed=4)
    np.testing.assert_array_equal(spec.build(5).matrix, new_random_projection(5, 2, 4).matrix)
    with pytest.raises(ConfigError):
        EmbedderSpec("random_projection", input_dim=6, output_dim=2).build(5)
    with pytest.raises(ConfigError):
        EmbedderSpec("pca").build(5)
