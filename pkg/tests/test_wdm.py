"""Tests for demux window allocation and capacity."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from starqkd.core import CENTER_FREQUENCY_THZ
from starqkd.errors import AllocationError
from starqkd.source import SpectrumModel
from starqkd.wdm import (
    AwgSpec,
    ChannelPlan,
    FrequencyWindow,
    GridSpec,
    Pairing,
    awg_plan,
    max_participants,
    validate_plan,
    wss_plan,
)


class TestFrequencyWindow:
    def test_bounds(self):
        w = FrequencyWindow(193.4, 100.0)
        assert w.lo_thz == pytest.approx(193.35)
        assert w.hi_thz == pytest.approx(193.45)

    def test_overlap_detection(self):
        a = FrequencyWindow(193.40, 100.0)
        b = FrequencyWindow(193.45, 100.0)
        c = FrequencyWindow(193.50, 100.0)
        assert a.overlaps(b)
        assert not a.overlaps(c)  # windows touching edge-to-edge are fine

    def test_mirror(self):
        w = FrequencyWindow(193.40, 100.0)
        m = w.mirrored()
        assert m.center_thz == pytest.approx(193.30)
        assert m.width_ghz == w.width_ghz

    def test_rejects_negative_width(self):
        with pytest.raises(AllocationError):
            FrequencyWindow(193.4, -1.0)


class TestAwgPlan:
    def test_single_pair_on_c33(self):
        plan = awg_plan([("alice", "diana", 33)])
        (pairing,) = plan.pairings
        assert pairing.window_a.center_thz == pytest.approx(193.3)
        assert pairing.window_b.center_thz == pytest.approx(193.4)
        assert plan.allocations["alice"][0].center_thz == pytest.approx(193.3)
        assert plan.allocations["diana"][0].center_thz == pytest.approx(193.4)

    def test_seventeen_pairs_fill_grating(self):
        pairs = [(f"a{c}", f"b{c}", c) for c in range(17, 34)]
        plan = awg_plan(pairs)
        assert len(plan.pairings) == 17
        assert len(plan.participants) == 34
        windows = [w for wins in plan.allocations.values() for w in wins]
        assert len({(w.center_thz, w.width_ghz) for w in windows}) == 34

    def test_below_grating_range_rejected(self):
        with pytest.raises(AllocationError):
            awg_plan([("a", "b", 16)])
        with pytest.raises(AllocationError):
            awg_plan([("a", "b", 51)])

    def test_duplicate_channel_rejected(self):
        with pytest.raises(AllocationError):
            awg_plan([("a", "b", 33), ("c", "d", 33)])

    def test_partner_collision_rejected(self):
        # C34 is C33's partner, so a second pair on 34 must fail.
        with pytest.raises(AllocationError):
            awg_plan([("a", "b", 33), ("c", "d", 34)])

    def test_mu_decreases_off_center(self):
        plan = awg_plan([("a", "b", 33), ("c", "d", 20)])
        center_mu = plan.pairings[0].mu
        edge_mu = plan.pairings[1].mu
        assert edge_mu < center_mu

    def test_deterministic(self):
        pairs = [("a", "b", 33), ("c", "d", 25)]
        assert awg_plan(pairs) == awg_plan(pairs)


class TestWssPlan:
    def test_two_demand_plan(self):
        plan = wss_plan({("alice", "bob"): 50.0, ("charlie", "diana"): 25.0})
        assert len(plan.pairings) == 2
        windows = [w for wins in plan.allocations.values() for w in wins]
        assert len(windows) == 4
        ab, cd = plan.pairings
        assert ab.window_a.width_ghz == 50.0
        assert cd.window_a.width_ghz == 25.0

    def test_windows_pack_outward_from_center(self):
        plan = wss_plan({("a", "b"): 50.0, ("c", "d"): 25.0, ("e", "f"): 12.5})
        offsets = [
            abs(p.window_a.center_thz - CENTER_FREQUENCY_THZ)
            for p in plan.pairings
        ]
        assert offsets == sorted(offsets)
        # First window hugs the center: offset is half its own width.
        assert offsets[0] == pytest.approx(25.0 * 1e-3)

    def test_off_grid_demand_rejected(self):
        with pytest.raises(AllocationError):
            wss_plan({("a", "b"): 30.0})
        with pytest.raises(AllocationError):
            wss_plan({("a", "b"): 10.0})

    def test_passband_exhaustion(self):
        with pytest.raises(AllocationError):
            wss_plan({("a", "b"): 2500.0, ("c", "d"): 100.0})

    def test_reconfiguration_builds_fresh_plan(self):
        first = wss_plan({("a", "b"): 50.0})
        second = wss_plan({("a", "c"): 50.0})
        assert first.pairings[0].participant_b == "b"
        assert second.pairings[0].participant_b == "c"
        assert (
            second.pairings[0].window_a.center_thz
            == first.pairings[0].window_a.center_thz
        )

    def test_wider_window_gets_larger_mu(self):
        plan = wss_plan({("a", "b"): 50.0, ("c", "d"): 50.0})
        inner, outer = plan.pairings
        assert inner.mu > outer.mu

    @given(st.lists(st.sampled_from([12.5, 25.0, 50.0, 100.0]), min_size=1, max_size=8))
    def test_all_plans_validate(self, widths):
        demands = {(f"p{i}", f"q{i}"): w for i, w in enumerate(widths)}
        plan = wss_plan(demands)
        validate_plan(plan)  # must not raise
        for pairing in plan.pairings:
            mid = 0.5 * (
                pairing.window_a.center_thz + pairing.window_b.center_thz
            )
            assert mid == pytest.approx(CENTER_FREQUENCY_THZ, abs=1e-9)


class TestValidator:
    def _window(self, center, width=100.0):
        return FrequencyWindow(center, width)

    def test_catches_out_of_band_window(self):
        win_hi = self._window(196.5)
        win_lo = win_hi.mirrored()
        with pytest.raises(AllocationError, match="passband"):
            ChannelPlan(
                device="test",
                allocations={"a": (win_hi,), "b": (win_lo,)},
                pairings=(Pairing("a", "b", win_hi, win_lo, 0.01),),
            )

    def test_catches_overlap(self):
        w1 = self._window(193.40)
        w2 = self._window(193.45)
        with pytest.raises(AllocationError, match="overlap"):
            ChannelPlan(
                device="test",
                allocations={"a": (w1,), "b": (w2,)},
                pairings=(),
            )

    def test_catches_asymmetric_pairing(self):
        w1 = self._window(193.5)
        w2 = self._window(193.3)
        with pytest.raises(AllocationError, match="symmetric"):
            ChannelPlan(
                device="test",
                allocations={"a": (w1,), "b": (w2,)},
                pairings=(Pairing("a", "b", w1, w2, 0.01),),
            )

    def test_catches_unallocated_pairing_window(self):
        w1 = self._window(193.4)
        w2 = w1.mirrored()
        with pytest.raises(AllocationError, match="not allocated"):
            ChannelPlan(
                device="test",
                allocations={"a": (w1,)},
                pairings=(Pairing("a", "b", w1, w2, 0.01),),
            )


class TestCapacity:
    def test_awg_capacity(self):
        assert max_participants(AwgSpec()) == 34

    def test_fifty_ghz_grid_capacity(self):
        assert max_participants(GridSpec(50.0)) == 102

    def test_zero_passband(self):
        assert max_participants(GridSpec(50.0), 0.0) == 0

    def test_narrow_awg(self):
        assert max_participants(AwgSpec(first_channel=33, last_channel=34)) == 2

    def test_awg_limited_by_passband(self):
        # A very narrow filter admits only the innermost channels.
        assert max_participants(AwgSpec(), passband_half_width_thz=0.15) == 2

    @given(st.floats(12.5, 200.0), st.floats(0.0, 2.55))
    def test_capacity_is_even_and_monotone_in_passband(self, spacing, half):
        cap = max_participants(GridSpec(spacing), half)
        assert cap % 2 == 0
        assert cap <= max_participants(GridSpec(spacing), 2.55)
