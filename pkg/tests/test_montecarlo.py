import numpy as np
import pytest

import oracles
from qndsim.core import AmpParams, BlochVector, Outcome, QubitParams, StrengthParams, update_eq1
from qndsim.montecarlo import dephasing_mean, lost_channel_map, martingale_mean, measure_once
from qndsim.rng import BLOCK_SIZE, SeedPlan
from qndsim.runner import run_blocks, simulate_backaction


def _zscores(cmap, sp, eta, min_counts=1000):
    c = cmap.centers
    ci, cq = np.meshgrid(c, c, indexing="ij")
    th = update_eq1(Outcome(ci, cq), sp, eta)
    means, se = cmap.means(), cmap.standard_errors()
    out = []
    for k, v in enumerate(th):
        ok = (cmap.counts[k] >= min_counts) & (se[k] > 0)
        out.append((means[k][ok] - v[ok]) / se[k][ok])
    return np.concatenate(out)


@pytest.mark.parametrize("z_i", [-1.0, -0.5, 0.0, 0.3, 0.9])
@pytest.mark.parametrize("eta", [1.0, 0.2])
def test_martingale(z_i, eta):
    est = martingale_mean(z_i, StrengthParams(0.8), eta, 200_000, 4)
    assert abs(est.mean - z_i) <= 4 * est.stderr + 1e-12


@pytest.mark.parametrize("s, qbar, eta", [(0.3, 0.384, 0.2), (1.0, 1.28, 0.2), (0.8, 0.0, 1.0)])
def test_dephasing_matches_quadrature(s, qbar, eta):
    est = dephasing_mean(StrengthParams(s, qbar), eta, 300_000, 5)
    assert est.mean == pytest.approx(oracles.dephasing_mean_y(s, qbar, eta), abs=4 * est.stderr)


def test_measure_once_pure_states_stay_pure():
    rng = SeedPlan(1).generator()
    _, st, _ = measure_once(BlochVector(0.0, 1.0, 0.0), StrengthParams(0.7, 0.3), 1.0, rng, 1000)
    np.testing.assert_allclose(st.x ** 2 + st.y ** 2 + st.z ** 2, 1.0, atol=1e-12)
    _, st, split = measure_once(BlochVector(0.0, 1.0, 0.0), StrengthParams(0.7, 0.3), 0.2, rng,
                                1000)
    assert split.s_lost > 0
    np.testing.assert_allclose(st.x ** 2 + st.y ** 2 + st.z ** 2, 1.0, atol=1e-12)


@pytest.mark.parametrize("s", [0.3, 1.0])
def test_lost_channel_map_agrees_with_update_rule(s):
    sp = StrengthParams(s, 1.28 * s)
    m = lost_channel_map(sp, 0.2, 2_000_000, 3, bins=41, half_range=4.0)
    z = _zscores(m, sp, 0.2)
    assert z.size > 1000
    assert abs(z.mean()) < 0.1 and 0.95 < z.std() < 1.05


def test_phase_correction_removes_mean_lost_phase():
    sp = StrengthParams(0.3, 0.384)
    m = lost_channel_map(sp, 0.2, 2_000_000, 3, bins=41, half_range=4.0, phase_correction=True)
    z = _zscores(m, StrengthParams(0.3, 0.0), 0.2)
    assert abs(z.mean()) < 0.1 and 0.95 < z.std() < 1.05
    assert _zscores(m, sp, 0.2).std() > 5


def test_run_blocks_order_independent_of_threads():
    f = lambda b, a, z: (b, a, z, SeedPlan(7, b).generator().random())
    one = list(run_blocks(f, 10 * 1000 + 3, 1, 1000))
    many = list(run_blocks(f, 10 * 1000 + 3, 4, 1000))
    assert one == many and len(one) == 11 and one[-1][1:3] == (10_000, 10_003)
    assert list(run_blocks(f, 0, 2)) == []


def test_backaction_identical_across_threads():
    qp = QubitParams(2.8e-6, 0.698e-6, 0.08, 380e-9)
    args = (StrengthParams(0.6, 0.77), StrengthParams(2.4), qp, AmpParams(0.2),
            2 * BLOCK_SIZE + 17, 11)
    a = simulate_backaction(*args, threads=1)
    b = simulate_backaction(*args, threads=3)
    for f in ("counts", "sums", "sumsq", "hist"):
        assert np.array_equal(getattr(a.cmap, f), getattr(b.cmap, f))
    assert (a.n_retained, a.y_count, a.y_sum) == (b.n_retained, b.y_count, b.y_sum)
    assert 0.5 < a.retention < 0.7
