import numpy as np
import pytest

from edgeplan.channel import Pmf, station_upload_table
from edgeplan.power import (
    PowerBreakdown,
    beyond_power,
    beyond_unit,
    hard_power,
    local_power,
    overlap_power,
    overlap_unit,
    soft_power,
    upload_power,
)
from edgeplan.scenario import bundled_config_path, load_scenario


@pytest.fixture(scope="module")
def set1():
    return load_scenario(bundled_config_path("set1"))


@pytest.fixture(scope="module")
def set1_uploads(set1):
    return [station_upload_table(bs, set1.classes) for bs in set1.base_stations]


def pmf(first, probs, tail=0.0):
    probs = np.asarray(probs, dtype=float)
    mean = float(np.dot(probs, np.arange(first, first + len(probs))))
    return Pmf(first=first, probs=probs, tail_mass=tail, mean_slots=mean)


def test_local_power_hand_value(set1):
    # lambda=11, p_local=0.25 W, 3 local slots, tau=1 s, everything blocked.
    assert local_power(1.0, set1.base_stations[0], set1) == pytest.approx(8.25, abs=1e-12)
    assert local_power(0.0, set1.base_stations[0], set1) == 0.0


def test_upload_power_hand_value(set1, set1_uploads):
    t_mean = set1_uploads[0].mean_slots
    got = upload_power(0.0, set1.base_stations[0], t_mean, set1)
    assert got == pytest.approx(11.0 * 0.0025 * t_mean, abs=1e-12)
    assert got == pytest.approx(0.032302, abs=1e-4)
    assert upload_power(1.0, set1.base_stations[0], t_mean, set1) == 0.0


def test_overlap_unit_hand_value(set1):
    # Backup run starts at slot 2 (3 local slots against a 4-slot deadline).
    up = pmf(1, [0.6, 0.4])
    soj = pmf(1, [0.5, 0.3, 0.2])
    # t=2: 0.6*0.5*0.25; t=3: (0.18+0.20)*0.50; t=4: (0.12+0.12)*0.75
    assert overlap_unit(0, up, soj, set1, 1.0) == pytest.approx(0.445, abs=1e-12)


def test_overlap_unit_respects_min_es_slots(set1):
    up = pmf(1, [0.6, 0.4])
    soj = pmf(1, [0.5, 0.3, 0.2])
    # y chosen so each edge run needs at least 2 slots: drops every split
    # that would finish the edge part in a single slot.
    y = set1.classes[0].cycles / (set1.f_es * 1.5)
    assert overlap_unit(0, up, soj, set1, y) == pytest.approx(0.27, abs=1e-12)
    with pytest.raises(ValueError):
        overlap_unit(0, up, soj, set1, 0.0)


def test_beyond_unit_hand_value(set1):
    up = pmf(1, [0.6, 0.4])
    soj = pmf(1, [0.5, 0.3, 0.2])
    # P[miss] = 1 - (0.6*1.0 + 0.4*0.8) = 0.08; wasted run burns 0.25*3 J.
    assert beyond_unit(0, up, soj, set1) == pytest.approx(0.06, abs=1e-12)


def test_beyond_counts_truncated_tail_as_late(set1):
    up = pmf(1, [1.0])
    soj = pmf(1, [0.9], tail=0.1)
    # cdf(3) = 0.9, so the truncated 0.1 is treated as a miss.
    assert beyond_unit(0, up, soj, set1) == pytest.approx(0.1 * 0.75, abs=1e-12)


def test_late_point_mass_is_all_beyond_no_overlap(set1):
    up = pmf(1, [1.0])
    soj = pmf(9, [1.0])  # lands well past the 4-slot deadline
    assert overlap_unit(0, up, soj, set1, 1.0) == 0.0
    assert beyond_unit(0, up, soj, set1) == pytest.approx(0.75, abs=1e-12)
    assert beyond_power(0.0, set1.base_stations[0], 0, up, soj, set1) == pytest.approx(
        11.0 * 0.75, abs=1e-10
    )


def test_result_at_backup_start_burns_one_slot(set1):
    # Completion exactly at t^L: one slot of the backup has run.
    up = pmf(1, [1.0])
    soj = pmf(set1.local_start_slot(0) - 1, [1.0])
    got = overlap_power(0.4, set1.base_stations[0], 0, up, soj, set1, 1.0)
    assert got == pytest.approx(0.6 * 11.0 * 0.25 * 1.0, abs=1e-12)


@pytest.mark.parametrize("component", ["local", "upload", "overlap", "beyond", "total"])
def test_each_component_affine_in_blocking(set1, set1_uploads, component):
    up = pmf(1, [0.6, 0.4])
    soj = pmf(1, [0.5, 0.3, 0.2])
    sojourns = [soj]

    def value(p):
        bd = hard_power(set1, [p, p, p], set1_uploads, sojourns, 1.0)
        if component == "total":
            return bd.total
        return float(np.sum(getattr(bd, component)))

    lo, mid, hi = value(0.0), value(0.4), value(1.0)
    assert mid == pytest.approx(0.6 * lo + 0.4 * hi, rel=1e-12, abs=1e-12)


def test_soft_power_all_blocked_is_all_local(set1, set1_uploads):
    bd = soft_power(set1, [1.0, 1.0, 1.0], set1_uploads)
    assert bd.total == pytest.approx(set1.all_local_power(), abs=1e-12)
    assert bd.total == pytest.approx(29.25, abs=1e-12)
    assert np.all(bd.upload == 0.0)


def test_hard_power_all_blocked_matches_soft(set1, set1_uploads):
    soj = pmf(1, [0.5, 0.3, 0.2])
    bd = hard_power(set1, [1.0, 1.0, 1.0], set1_uploads, [soj], 1.0)
    assert bd.total == pytest.approx(29.25, abs=1e-12)
    assert np.all(bd.overlap == 0.0) and np.all(bd.beyond == 0.0)


def test_hard_power_sums_station_cells(set1, set1_uploads):
    soj = pmf(1, [0.5, 0.3, 0.2])
    b = [0.2, 0.3, 0.4]
    bd = hard_power(set1, b, set1_uploads, [soj], 1.0)
    for n, bs in enumerate(set1.base_stations):
        expect_o = 0.0
        expect_b = 0.0
        for k, (up, w) in enumerate(
            zip(set1_uploads[n].pmfs[0], set1_uploads[n].weights[0])
        ):
            expect_o += w * overlap_power(b[n], bs, 0, up, soj, set1, 1.0)
            expect_b += w * beyond_power(b[n], bs, 0, up, soj, set1)
        assert bd.overlap[n] == pytest.approx(expect_o, rel=1e-12)
        assert bd.beyond[n] == pytest.approx(expect_b, rel=1e-12)
        assert bd.station_total(n) == pytest.approx(
            bd.local[n] + bd.upload[n] + bd.overlap[n] + bd.beyond[n], rel=1e-12
        )


def test_breakdown_dict_and_validation(set1, set1_uploads):
    bd = soft_power(set1, [0.1, 0.2, 0.3], set1_uploads)
    d = bd.as_dict()
    assert d["total_W"] == pytest.approx(bd.total)
    assert set(d) == {"local_W", "upload_W", "overlap_W", "beyond_W", "total_W"}
    with pytest.raises(ValueError):
        soft_power(set1, [0.1, 0.2], set1_uploads)
    with pytest.raises(ValueError):
        soft_power(set1, [0.1, 0.2, 1.5], set1_uploads)
    assert isinstance(bd, PowerBreakdown)
