import pytest
from numpy.testing import assert_allclose

from cfmimo.costs import (ARCHITECTURES, combining_costs, decoding_costs,
                          uplink_symbols)


def test_uplink_symbols():
    assert uplink_symbols(200, 7) == 96.5
    assert uplink_symbols(200, 5) == 97.5


def test_decoding_spot_values():
    # M = 2, T = 3, l_u = 96.5, worked out by hand from the counting rules
    o = decoding_costs(2, 3, 96.5, "olsfd")
    l = decoding_costs(2, 3, 96.5, "local")
    assert o.fronthaul == 203.0      # 96.5 * 2 + (3 * 2 * 3 + 2) / 2
    assert l.fronthaul == 193.0      # 96.5 * 2
    assert o.weight_compute == 15.0  # 3 * 3 + 2 + 4
    assert l.weight_compute == 15.0  # 3 * 3 + 2 + 4
    with pytest.raises(ValueError):
        decoding_costs(2, 3, 96.5, "centralized")


def test_decoding_fronthaul_gap_scales_with_ues():
    # the statistics shipping term is (3 M T + M) / 2
    for M, T in ((4, 10), (16, 50), (100, 100)):
        o = decoding_costs(M, T, 96.5, "olsfd")
        l = decoding_costs(M, T, 96.5, "local")
        assert o.fronthaul - l.fronthaul == (3 * M * T + M) / 2
        # the central solve pays the M^3 factorization, local only sums
        assert o.weight_compute - l.weight_compute == (M**3 - M) / 3 - M


def test_combining_spot_values():
    # A = 8, L_S = 2, L_p = 7, T = 10, worked out by hand
    assert combining_costs(8, 7, 2, 10, "pfzf") == 138.0
    assert combining_costs(8, 7, 2, 10, "gpfzf") == 114.0
    # the projected variants add 2 (L_p - L_S) L_S A = 160
    assert combining_costs(8, 7, 2, 10, "pwpfzf") == 298.0
    assert combining_costs(8, 7, 2, 10, "gpwpfzf") == 274.0
    with pytest.raises(ValueError):
        combining_costs(8, 7, 2, 10, "mr")


def test_combining_zero_strong_reduces_to_mr_stage():
    # no Gram work at L_S = 0; only the MR stage remains
    assert combining_costs(8, 7, 0, 10, "pfzf") == 8 * 10
    assert combining_costs(8, 7, 0, 10, "gpfzf") == 8 * 7
    assert combining_costs(8, 7, 0, 10, "gpwpfzf") == 8 * 7


def test_combining_monotone_in_strong_count():
    for scheme in ("pfzf", "gpfzf", "pwpfzf", "gpwpfzf"):
        prev = -1.0
        for ls in range(0, 7):
            cost = combining_costs(8, 7, ls, 10, scheme)
            assert cost > prev
            prev = cost


def test_adaptive_variants_track_pilot_count_not_ues():
    # per-pilot MR stage: UE count must not matter
    assert (combining_costs(8, 7, 2, 10, "gpfzf")
            == combining_costs(8, 7, 2, 1000, "gpfzf"))
    assert (combining_costs(8, 7, 2, 1000, "pfzf")
            - combining_costs(8, 7, 2, 10, "pfzf")) == 8 * 990


def test_architectures_tuple():
    assert ARCHITECTURES == ("olsfd", "local")
