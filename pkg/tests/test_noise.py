import numpy as np
import pytest

from diffmon import NoiseSource, draw_wiener
from diffmon.errors import ValidationError


def test_mean_within_clt_bound():
    src = NoiseSource(123, 0, 2)
    dt = 1e-3
    dws = src.draw_block(500_000, dt)
    bound = 4.0 * np.sqrt(dt / dws.shape[0])
    assert np.max(np.abs(dws.mean(axis=0))) < bound


def test_covariance_close_to_dt_identity():
    src = NoiseSource(123, 1, 2)
    dt = 1e-3
    dws = src.draw_block(500_000, dt)
    cov = dws.T @ dws / dws.shape[0]
    assert np.max(np.abs(np.diag(cov) / dt - 1.0)) < 0.01
    assert abs(cov[0, 1]) < 0.01 * dt


def test_replay_is_bit_identical():
    a = NoiseSource(9, 4, 3).draw_block(100, 0.01)
    b = NoiseSource(9, 4, 3).draw_block(100, 0.01)
    assert np.array_equal(a, b)


def test_streams_differ():
    a = NoiseSource(9, 0, 3).draw_block(10, 0.01)
    b = NoiseSource(9, 1, 3).draw_block(10, 0.01)
    c = NoiseSource(10, 0, 3).draw_block(10, 0.01)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_block_split_matches_single_block():
    whole = NoiseSource(5, 2, 2).draw_block(17, 0.05)
    src = NoiseSource(5, 2, 2)
    parts = np.vstack([src.draw_block(10, 0.05), src.draw_block(7, 0.05)])
    assert np.array_equal(whole, parts)
    assert src.step == 17


def test_skip_advances_stream():
    whole = NoiseSource(5, 3, 2).draw_block(6, 0.1)
    src = NoiseSource(5, 3, 2)
    src.skip(5)
    assert np.array_equal(src.draw_wiener(0.1), whole[5])


def test_draw_wiener_helper():
    a = draw_wiener(NoiseSource(1, 1, 4), 0.2)
    b = NoiseSource(1, 1, 4).draw_block(1, 0.2)[0]
    assert np.array_equal(a, b)


def test_argument_validation():
    with pytest.raises(ValidationError):
        NoiseSource(-1, 0, 2)
    with pytest.raises(ValidationError):
        NoiseSource(0, 0, 0)
    with pytest.raises(ValidationError):
        NoiseSource(0, 0, 2).draw_block(3, 0.0)


def test_increments_scale_with_dt():
    z1 = NoiseSource(7, 7, 1).draw_block(5, 1.0)
    z2 = NoiseSource(7, 7, 1).draw_block(5, 4.0)
    assert np.allclose(z2, 2.0 * z1, atol=1e-15)
