"""GEV margin transform: values, Jacobian, support errors, inverse."""

import numpy as np
import pytest

from maxstable.models import GevMargin, OutOfSupportError, frechet_to_gev, gev_to_frechet


def test_unit_frechet_is_identity():
    margins = [GevMargin(), GevMargin(), GevMargin()]
    x = np.array([0.3, 1.0, 7.5])
    u, ljac = gev_to_frechet(x, margins)
    assert np.allclose(u, x, rtol=1e-14)
    assert abs(ljac) < 1e-14


def test_xi_one_example():
    # mu=0, sigma=1, xi=1: U(1) = 2 and the log-jacobian term vanishes
    u, ljac = gev_to_frechet(np.array([1.0]), [GevMargin(0.0, 1.0, 1.0)])
    assert abs(u[0] - 2.0) < 1e-14
    assert abs(ljac) < 1e-14


def test_gumbel_limit():
    u, ljac = gev_to_frechet(np.array([0.0]), [GevMargin(0.0, 1.0, 0.0)])
    assert abs(u[0] - 1.0) < 1e-14
    assert abs(ljac) < 1e-14
    # tiny xi falls into the same branch
    u2, _ = gev_to_frechet(np.array([0.0]), [GevMargin(0.0, 1.0, 1e-12)])
    assert abs(u2[0] - 1.0) < 1e-14


def test_log_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    margins = [
        GevMargin(0.5, 2.0, 0.4),
        GevMargin(-1.0, 0.7, -0.3),
        GevMargin(2.0, 1.5, 0.0),
    ]
    x = np.array([1.2, -1.4, 2.6])
    u, ljac = gev_to_frechet(x, margins)
    h = 1e-6
    total = 0.0
    for i in range(3):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        up, _ = gev_to_frechet(xp, margins)
        um, _ = gev_to_frechet(xm, margins)
        dudx = (up[i] - um[i]) / (2.0 * h)
        m = margins[i]
        per = -np.log(m.sigma) + (1.0 - m.xi) * np.log(u[i])
        assert abs(dudx / np.exp(per) - 1.0) < 1e-6
        total += per
    assert abs(total - ljac) < 1e-12
    del rng


def test_out_of_support_names_component():
    margins = [GevMargin(0.0, 1.0, 0.5)] * 3
    x = np.array([0.5, -3.0, 0.5])  # support is x > -2 for xi=0.5
    with pytest.raises(OutOfSupportError, match="component 2"):
        gev_to_frechet(x, margins)


def test_negative_xi_upper_endpoint():
    # xi=-0.5: support is x < mu + sigma/|xi| = 2
    with pytest.raises(OutOfSupportError, match="component 1"):
        gev_to_frechet(np.array([3.0]), [GevMargin(0.0, 1.0, -0.5)])


def test_batch_shape_matches_rowwise():
    rng = np.random.default_rng(11)
    margins = [GevMargin(1.0, 2.0, 0.3), GevMargin(0.0, 1.0, 0.0)]
    x = np.column_stack([rng.uniform(0.0, 5.0, 6), rng.normal(0.0, 1.0, 6)])
    u, ljac = gev_to_frechet(x, margins)
    assert u.shape == (6, 2) and ljac.shape == (6,)
    for r in range(6):
        ur, lr = gev_to_frechet(x[r], margins)
        assert np.allclose(ur, u[r], rtol=1e-14)
        assert abs(lr - ljac[r]) < 1e-12


def test_roundtrip_inverse():
    margins = [GevMargin(0.5, 2.0, 0.4), GevMargin(-1.0, 0.7, -0.3), GevMargin(2.0, 1.5, 0.0)]
    x = np.array([1.2, -1.4, 2.6])
    u, _ = gev_to_frechet(x, margins)
    assert np.allclose(frechet_to_gev(u, margins), x, rtol=1e-12)
    u_grid = np.array([0.1, 1.0, 30.0])
    x_back = frechet_to_gev(u_grid, margins)
    u_again, _ = gev_to_frechet(x_back, margins)
    assert np.allclose(u_again, u_grid, rtol=1e-12)


def test_margin_validation():
    with pytest.raises(ValueError):
        GevMargin(0.0, -1.0, 0.3)
    with pytest.raises(ValueError):
        GevMargin(0.0, 0.0, 0.3)
    with pytest.raises(ValueError):
        gev_to_frechet(np.array([1.0, 2.0]), [GevMargin()])
    with pytest.raises(ValueError):
        frechet_to_gev(np.array([1.0, -2.0]), [GevMargin(), GevMargin()])
