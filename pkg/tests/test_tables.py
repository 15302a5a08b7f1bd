"""Success-probability tables: ideal statistics, the lossy channel
model, and the CSV rendering."""

import numpy as np
import pytest

from mdiqkd.tables import (
    ChannelParams,
    ProbTable,
    SettingLabel,
    channel_table,
    eta_from_loss_db,
    ideal_sources,
    ideal_table,
    party_settings,
    table_from_sources,
)
from mdiqkd.qudit import Basis, me_state


def test_setting_labels_order_and_str():
    labels = party_settings(3)
    assert [str(s) for s in labels] == ["0", "1", "2", "0bar", "1bar", "2bar"]
    assert [s.offset(3) for s in labels] == list(range(6))


def test_ideal_table_dim2():
    t = ideal_table(2)
    expected = np.array([
        [0.5, 0.0, 0.25, 0.25],
        [0.0, 0.5, 0.25, 0.25],
        [0.25, 0.25, 0.5, 0.0],
        [0.25, 0.25, 0.0, 0.5],
    ])
    assert np.allclose(t.probs, expected, atol=1e-12)


def test_mismatched_uniformity_dim3():
    t = ideal_table(3)
    assert np.allclose(t.probs[:3, 3:], 1.0 / 9.0, atol=1e-12)
    assert np.allclose(t.probs[3:, :3], 1.0 / 9.0, atol=1e-12)


def test_channel_table_lossless_equals_ideal():
    for dim in (2, 3):
        ideal = ideal_table(dim)
        lossless = channel_table(ChannelParams(eta=1.0, dark=0.0), dim)
        assert np.array_equal(ideal.probs, lossless.probs)


def test_channel_table_monotone_in_dark():
    # Holds in the lossy regime; without loss the idle-detector no-click
    # factor attenuates entries faster than dark events add to them.
    darks = [0.0, 1e-6, 1e-4, 1e-3]
    for dim in (2, 3):
        for eta in (0.5, 0.3, 0.05):
            prev = None
            for d in darks:
                probs = channel_table(ChannelParams(eta=eta, dark=d), dim).probs
                if prev is not None:
                    assert np.all(probs >= prev - 1e-15)
                prev = probs


def test_channel_table_mismatched_shift_uniform():
    t = channel_table(ChannelParams(eta=0.2, dark=1e-4), 3)
    mism = t.probs[:3, 3:]
    assert np.allclose(mism, mism[0, 0], atol=1e-15)


def test_eta_from_loss_db():
    assert eta_from_loss_db(0.0) == 1.0
    assert abs(eta_from_loss_db(10.0) - 0.1) < 1e-15
    assert abs(eta_from_loss_db(3.0) - 10 ** (-0.3)) < 1e-15


def test_accessor_views():
    t = ideal_table(3)
    assert t.entry(SettingLabel(Basis.ORDINARY, 0), SettingLabel(Basis.ORDINARY, 0)) == t.probs[0, 0]
    assert t.bar(1, 2) == t.probs[4, 5]
    assert np.array_equal(t.alice_bar_row(2), t.probs[5, :3])
    assert np.array_equal(t.bob_bar_col(1), t.probs[:3, 4])


def test_table_validation():
    with pytest.raises(ValueError):
        ProbTable(dim=3, probs=np.zeros((4, 4)))
    with pytest.raises(ValueError):
        ProbTable(dim=3, probs=np.full((6, 6), 1.5))
    with pytest.raises(ValueError):
        ProbTable(dim=4, probs=np.zeros((8, 8)))


def test_table_probs_read_only():
    t = ideal_table(3)
    with pytest.raises(ValueError):
        t.probs[0, 0] = 0.5


def test_table_from_sources_rejects_unnormalized():
    states = ideal_sources(3)
    bad = list(states)
    bad[0] = np.array([1.0, 1.0, 0.0], dtype=complex)
    with pytest.raises(ValueError):
        table_from_sources(bad, states, me_state(3, 0, 0))


def test_csv_format():
    text = ideal_table(2).to_csv()
    lines = text.split("\n")
    assert lines[0] == "alice\\bob,0,1,0bar,1bar"
    assert len(lines) == 6 and lines[-1] == ""
    assert "\r" not in text
    row0 = lines[1].split(",")
    assert row0[0] == "0"
    assert abs(float(row0[1]) - 0.5) < 1e-12
    # 17 significant digits survive a round trip.
    t = channel_table(ChannelParams(eta=0.37, dark=1e-5), 3)
    cells = t.to_csv().split("\n")[1].split(",")[1:]
    assert [float(c) for c in cells] == list(t.probs[0])
