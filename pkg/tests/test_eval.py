import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halowsync.dataset import ChannelRanges, gen_cfo_set, gen_detection_set
from halowsync.eval import (PUBLISHED_CFO_FLOPS, CSV_COLUMNS, FlopCount, FlopsQuery, MetricsReport,
                            axis_extents, cfo_metrics, cfo_model_flops, conventional_cfo,
                            conventional_detection, detection_metrics, detector_block_flops,
                            detector_throughput_flops, emit_report, layer_flops, network_flops,
                            parse_csv, report_csv, report_svg)
from halowsync.models import CfoModel

# Hand-scored detection fixture: (label, prediction, snr)
DET_FIXTURE = [(5, 7, 1.2), (10, -1, 1.7), (-1, -1, 2.5), (-1, 3, 2.1), (20, 20, 3.9), (0, 4, 3.0)]


def _det(fixture=DET_FIXTURE):
    lab, pred, snr = (np.array(c, dtype=float) for c in zip(*fixture))
    return detection_metrics(pred, lab, snr)


class TestDetectionMetrics:
    def test_perfect(self):
        lab = np.array([3, -1, 0, 39, -1])
        m = detection_metrics(lab, lab, np.arange(5) + 1.0)
        assert m.overall_mae == 0 and m.miss_rate == 0 and m.false_alarm_rate == 0

    def test_all_no_packet(self):
        lab = np.array([1, -1] * 50)
        m = detection_metrics(np.full(100, -1), lab, np.full(100, 10.0))
        assert m.miss_rate == 1.0 and m.false_alarm_rate == 0.0
        assert math.isnan(m.overall_mae)

    def test_hand_fixture(self):
        m = _det()
        assert m.overall_mae == pytest.approx(2.0)
        assert m.miss_rate == pytest.approx(0.25)
        assert m.false_alarm_rate == pytest.approx(0.5)
        assert [b.snr_db for b in m.bins] == [1.0, 2.0, 3.0]
        b1, b2, b3 = m.bins
        assert (b1.n, b1.mae, b1.miss_rate, b1.false_alarm_rate) == (2, 2.0, 0.5, 0.0)
        assert b2.n == 2 and math.isnan(b2.mae) and b2.false_alarm_rate == 0.5
        assert (b3.n, b3.mae, b3.miss_rate) == (2, 2.0, 0.0)

    @given(st.lists(st.tuples(st.integers(-1, 39), st.integers(-1, 39), st.floats(1, 25)),
                    min_size=1, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_rate_properties(self, rows):
        lab, pred, snr = (np.array(c, dtype=float) for c in zip(*rows))
        m = detection_metrics(pred, lab, snr)
        pos = lab >= 0
        if pos.any():
            hit = np.mean(pred[pos] >= 0)
            assert m.miss_rate + hit == pytest.approx(1.0, abs=1e-12)
        assert 0 <= m.miss_rate <= 1 and 0 <= m.false_alarm_rate <= 1
        edges = [b.snr_db for b in m.bins]
        assert edges[0] <= snr.min() and edges[-1] + 1 > snr.max()
        assert sum(b.n for b in m.bins) == len(lab)

    def test_coarse_bins(self):
        m = detection_metrics(np.zeros(4), np.zeros(4), np.array([1.0, 4.9, 5.0, 24.0]), 5.0)
        assert [b.snr_db for b in m.bins] == [0, 5, 10, 15, 20]
        assert [b.n for b in m.bins] == [2, 1, 0, 0, 1]

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            MetricsReport("detection", [], 0.0, miss_rate=1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            detection_metrics([1, 2], [1], [3, 4])


class TestCfoMetrics:
    def test_zero_error(self):
        lab = np.linspace(-15_000, 15_000, 11)
        m = cfo_metrics(lab, lab, np.full(11, 10.0))
        assert m.overall_mae == 0 and m.outliers == 0

    def test_constant_bias(self):
        lab = np.linspace(-15_000, 15_000, 11)
        assert cfo_metrics(lab + 100, lab, np.full(11, 10.0)).overall_mae == pytest.approx(100)

    def test_hand_fixture(self):
        lab = np.array([0, 1000, -2000, 500, 300.0])
        pred = np.array([10, 1100, -2000, 450, 2300.0])
        m = cfo_metrics(pred, lab, np.array([1, 2, 3, 4, 5.0]))
        assert m.overall_mae == pytest.approx(432.0)
        assert m.outliers == 1  # 2000 Hz > 10 x median (50 Hz)
        truth, est = m.scatter
        np.testing.assert_array_equal(truth, lab)
        np.testing.assert_array_equal(est, pred)


class TestLayerFlops:
    @pytest.mark.parametrize("q, mul, add", [
        (FlopsQuery("dense", N_i=160, N_o=32), 5_120, 5_152),
        (FlopsQuery("simple", U=30, NF=16), 1_440, 1_410),
        (FlopsQuery("conv1d", F=8, ch_i=4, ch_o=9, K=3), 864, 1_080),
        (FlopsQuery("lstm", U=30, NF=16), 5_760, 5_640),
        (FlopsQuery("gru", U=30, NF=16), 4_320, 4_230),
        (FlopsQuery("free"), 0, 0),
    ])
    def test_examples(self, q, mul, add):
        assert layer_flops(q) == FlopCount(mul, add)

    @given(st.integers(1, 50), st.integers(1, 50), st.integers(1, 50), st.integers(1, 50))
    @settings(max_examples=50, deadline=None)
    def test_expressions_exact(self, a, b, c, d):
        assert layer_flops(FlopsQuery("conv1d", F=a, ch_i=b, ch_o=c, K=d)) == \
            FlopCount(a * b * c * d, a * (b + 1) * c * d)
        assert layer_flops(FlopsQuery("dense", N_i=a, N_o=b)) == FlopCount(a * b, (a + 1) * b)
        cell = FlopCount(a * a + b * a + 2 * a, a * a + b * a + a)
        assert layer_flops(FlopsQuery("lstm", U=a, NF=b)) == cell.scale(4)
        assert layer_flops(FlopsQuery("gru", U=a, NF=b)) == cell.scale(3)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            layer_flops(FlopsQuery("attention"))


class TestNetworkFlops:
    def test_dnn_sum(self):
        expected = sum(i * o + (i + 1) * o for i, o in [(160, 32), (32, 64), (64, 16), (16, 1)])
        assert expected == 16_529
        assert network_flops(CfoModel("dnn").net).total == 16_529

    @pytest.mark.parametrize("kind, ours", [("lstm", 11_716), ("gru", 8_866),
                                            ("dnn", 16_529), ("conventional", 227)])
    def test_within_five_percent(self, kind, ours):
        total = cfo_model_flops(kind).total
        assert total == ours
        assert abs(total - PUBLISHED_CFO_FLOPS[kind]) <= 0.05 * PUBLISHED_CFO_FLOPS[kind]

    def test_empty(self):
        assert network_flops([]).total == 0

    def test_itemized(self):
        b = cfo_model_flops("lstm")
        assert [name for name, _ in b.items] == ["0:lstm", "1:dense", "3:dense"]
        assert "total" in b.table()

    def test_detector_block(self):
        assert detector_block_flops(40).total == 2_269

    def test_conv_needs_length(self):
        with pytest.raises(ValueError):
            FlopsQuery.from_layer(CfoModel("dnn").net[0].__class__.conv1d(3, 1, 1))


class TestThroughput:
    def test_doubling_block_halves(self):
        assert detector_throughput_flops(1000, 80) == detector_throughput_flops(1000, 40) / 2

    def test_conventional_independent_of_block(self):
        vals = {detector_throughput_flops(None, B) for B in (40, 80, 1600)}
        assert vals == {20e6}

    def test_block_size_trend(self):
        small = detector_throughput_flops(detector_block_flops(40).count, 40)
        large = detector_throughput_flops(detector_block_flops(1600).count, 1600)
        assert detector_block_flops(1600).total > detector_block_flops(40).total
        assert large > small


class TestReport:
    def test_csv_round_trip(self):
        m = _det()
        text = report_csv(m)
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
        back = parse_csv(text)
        assert len(back) == 3
        for a, b in zip(back, m.bins):
            assert a.n == b.n and a.snr_db == b.snr_db
            assert (math.isnan(a.mae) and math.isnan(b.mae)) or a.mae == pytest.approx(b.mae)

    def test_empty_report(self):
        m = detection_metrics([], [], [])
        assert report_csv(m) == ",".join(CSV_COLUMNS) + "\n"

    def test_svg_deterministic_with_hash(self, tmp_path):
        m = detection_metrics(*[np.array(c, dtype=float) for c in
                                zip(*[(p, l, s) for l, p, s in DET_FIXTURE])], config_hash="abc123")
        a = emit_report(m, tmp_path / "a.svg").read_bytes()
        b = emit_report(m, tmp_path / "b.svg").read_bytes()
        assert a == b and b"config_hash: abc123" in a
        ET.fromstring(a)  # well-formed

    def test_axis_extents(self):
        m = _det()
        assert axis_extents(m) == (1.0, 3.0, 0.0, 2.0)
        root = ET.fromstring(report_svg(m))
        assert root.get("data-x-min") == "1" and root.get("data-y-max") == "2"
        c = cfo_metrics(np.array([-100.0, 50.0]), np.array([-80.0, 300.0]), np.array([5.0, 6.0]))
        assert axis_extents(c) == (-100.0, 300.0, -100.0, 300.0)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(_det(), tmp_path / "x.pdf")


class TestConventional:
    NOISELESS = dict(snr_min=math.inf, snr_max=math.inf)

    @pytest.mark.parametrize("channel", ["awgn", "multipath"])
    def test_noiseless_detection_exact(self, channel):
        r = ChannelRanges(channel=channel, **self.NOISELESS)
        recs = gen_detection_set(60, 40, r, master_seed=3)
        preds = conventional_detection(recs, r)
        m = detection_metrics(preds, recs.label, recs.snr_db)
        assert m.overall_mae == 0 and m.miss_rate == 0 and m.false_alarm_rate == 0

    def test_noiseless_cfo(self):
        r = ChannelRanges(channel="awgn", **self.NOISELESS)
        recs = gen_cfo_set(20, r, master_seed=3)
        assert cfo_metrics(conventional_cfo(recs, r), recs.label, recs.snr_db).overall_mae < 1.0

    def test_task_checked(self):
        recs = gen_cfo_set(2, master_seed=0)
        with pytest.raises(ValueError):
            conventional_detection(recs, ChannelRanges())
