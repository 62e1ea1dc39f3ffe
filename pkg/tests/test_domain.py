import numpy as np
import pytest
from hypothesis import given, strategies as st

from irldr.domain import (
    Appliance,
    ApplianceClass,
    Household,
    SlotIndex,
    canonical_household,
    classify_partition,
    total_demand,
)


def _household(series: dict[str, list[float]]) -> Household:
    return canonical_household("hh", {k: np.array(v, dtype=float) for k, v in series.items()})


def _pad_day(values: list[float]) -> list[float]:
    return values + [0.0] * (96 - len(values))


class TestTotalDemand:
    def test_sums_per_appliance_demands(self):
        h = _household(
            {
                "base": _pad_day([2.0]),
                "ac": _pad_day([1.0]),
                "ev": _pad_day([0.5]),
            }
        )
        assert total_demand(h, SlotIndex(0, 0)) == pytest.approx(3.5)

    def test_all_zero(self):
        h = _household({"base": [0.0] * 96})
        assert total_demand(h, SlotIndex(0, 10)) == 0.0

    def test_matches_brute_force_resummation(self):
        rng = np.random.default_rng(42)
        series = {name: rng.uniform(0, 3, 192) for name in ("base", "ac", "ev", "dryer")}
        h = canonical_household("hh", series)
        for flat in rng.integers(0, 192, size=25):
            t = SlotIndex(int(flat) // 96, int(flat) % 96)
            expected = sum(h.demand[a.name][t.flat] for a in h.appliances)
            assert total_demand(h, t) == pytest.approx(expected, abs=1e-12)

    def test_out_of_range_slot(self):
        h = _household({"base": [0.1] * 96})
        with pytest.raises(IndexError):
            total_demand(h, SlotIndex(1, 0))

    def test_additive_over_merged_households(self):
        rng = np.random.default_rng(3)
        a = {name: rng.uniform(0, 2, 96) for name in ("base", "ac")}
        b = {name: rng.uniform(0, 2, 96) for name in ("base", "ac")}
        ha = canonical_household("a", dict(a))
        hb = canonical_household("b", dict(b))
        merged = canonical_household("ab", {k: a[k] + b[k] for k in a})
        for slot in (0, 17, 95):
            t = SlotIndex(0, slot)
            assert total_demand(merged, t) == pytest.approx(
                total_demand(ha, t) + total_demand(hb, t)
            )


class TestClassifyPartition:
    def test_direct_mapping(self):
        h = _household({"ev": _pad_day([1.0]), "ac": _pad_day([1.0]), "base": _pad_day([1.0])})
        ts, pc, ns = classify_partition(h)
        assert {a.name for a in ts} >= {"ev"}
        assert [a.name for a in pc] == ["ac"]
        assert [a.name for a in ns] == ["base"]

    def test_no_time_shiftables_in_custom_inventory(self):
        h = Household(
            "hh",
            (
                Appliance("ac", ApplianceClass.POWER_CURTAILABLE),
                Appliance("base", ApplianceClass.NON_SHIFTABLE),
            ),
            {"ac": np.zeros(96), "base": np.zeros(96)},
        )
        ts, pc, ns = classify_partition(h)
        assert ts == []
        assert len(pc) == 1 and len(ns) == 1

    def test_six_appliance_union_equals_inventory(self):
        h = _household({name: [0.0] * 96 for name in ("base",)})
        ts, pc, ns = classify_partition(h)
        assert {a.name for a in ts + pc + ns} == {a.name for a in h.appliances}

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_partition_is_a_bijection(self, seed):
        rng = np.random.default_rng(seed)
        names = list(np.random.default_rng(seed).permutation(["base", "ac", "ev", "dryer"]))
        h = canonical_household("hh", {n: rng.uniform(0, 1, 96) for n in names})
        ts, pc, ns = classify_partition(h)
        combined = [a.name for a in ts + pc + ns]
        assert sorted(combined) == sorted(a.name for a in h.appliances)
        assert len(set(combined)) == len(combined)


class TestValidation:
    def test_rejects_negative_demand(self):
        with pytest.raises(ValueError, match="finite and >= 0"):
            _household({"base": [-0.1] * 96})

    def test_rejects_partial_days(self):
        with pytest.raises(ValueError, match="whole 96-slot days"):
            _household({"base": [0.0] * 95})

    def test_rejects_unknown_canonical_name(self):
        with pytest.raises(ValueError, match="unknown appliance"):
            canonical_household("hh", {"toaster": np.zeros(96)})

    def test_rejects_mismatched_demand_keys(self):
        with pytest.raises(ValueError, match="match the appliance inventory"):
            Household(
                "hh",
                (Appliance("base", ApplianceClass.NON_SHIFTABLE),),
                {"other": np.zeros(96)},
            )

    def test_slot_index_bounds(self):
        with pytest.raises(ValueError):
            SlotIndex(0, 96)
        assert SlotIndex(0, 37).hour == 9
