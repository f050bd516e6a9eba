import json
import math
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodfreq.errors import DomainError, PairingError, UndefinedImprovementError
from prodfreq.eventlog import ProductionSignal
from prodfreq.ltitasks import Automation, TaskModel, run_task
from prodfreq.econ import CobbDouglasFit
from prodfreq.spectral import compare_logs, kappa, spectrum

N = 1000
BIN = 1 / N
n_idx = np.arange(N)


def tone(f, n=N, phase=0.0):
    return np.cos(2 * np.pi * f * np.arange(n) + phase)


class TestSpectrum:
    def test_single_tone(self):
        s = spectrum(tone(0.1))
        assert abs(s.f_0 - 0.1) <= BIN
        assert abs(s.f_m - 0.1) <= BIN
        assert not s.empty

    def test_two_tone_centroid(self):
        s = spectrum(tone(0.1) + tone(0.3))
        assert abs(s.f_m - 0.2) <= BIN
        assert s.f_0 == pytest.approx(0.1)

    def test_impulse_train_against_dft(self):
        x = (n_idx % 8 == 0).astype(float)
        s = spectrum(x, window="rect")
        ref = np.abs([np.sum((x - x.mean()) * np.exp(-2j * np.pi * k * n_idx / N)) for k in range(N // 2 + 1)])
        np.testing.assert_allclose(s.magnitudes, ref, atol=1e-8)
        assert abs(s.f_0 - 0.125) <= BIN

    def test_grid_invariants(self):
        s = spectrum(np.random.default_rng(0).normal(size=257))
        assert np.all(np.diff(s.frequencies) > 0)
        assert s.frequencies[0] == 0 and s.frequencies[-1] <= 0.5
        assert len(s.frequencies) == len(s.magnitudes)
        assert 0 <= s.f_m <= 0.5 and 0 <= s.f_0 <= 0.5

    def test_constant_is_empty(self):
        s = spectrum(np.full(64, 3.0))
        assert s.empty and s.f_m == 0 and s.f_0 == 0

    def test_too_short(self):
        with pytest.raises(DomainError):
            spectrum([1.0, 2.0, 3.0])

    def test_unknown_window(self):
        with pytest.raises(ValueError):
            spectrum(tone(0.1), window="kaiser")

    def test_label_and_csv(self):
        sig = ProductionSignal(np.abs(tone(0.1, 64)), timedelta(minutes=5), label="B")
        s = spectrum(sig)
        assert s.label == "B"
        lines = s.to_csv().splitlines()
        assert lines[0] == "frequency,magnitude" and len(lines) == 34
        assert json.loads(json.dumps(s.to_dict(include_spectrum=True)))["label"] == "B"

    @settings(max_examples=30, deadline=None)
    @given(st.integers(16, 400), st.integers(0, 10_000))
    def test_parseval(self, n, seed):
        x = np.random.default_rng(seed).normal(size=n)
        mags = spectrum(x, window="rect").magnitudes
        inner = mags[1:-1] if n % 2 == 0 else mags[1:]
        two_sided = mags[0] ** 2 + 2 * np.sum(inner**2) + (mags[-1] ** 2 if n % 2 == 0 else 0.0)
        xc = x - x.mean()
        assert two_sided == pytest.approx(n * np.sum(xc**2), rel=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 500), st.integers(0, 10_000))
    def test_shift_invariance(self, shift, seed):
        x = np.random.default_rng(seed).normal(size=500)
        a = spectrum(x, window="rect")
        b = spectrum(np.roll(x, shift), window="rect")
        np.testing.assert_allclose(a.magnitudes, b.magnitudes, atol=1e-9 * max(1.0, a.magnitudes.max()))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 1e3), st.integers(0, 10_000))
    def test_scale_invariance(self, c, seed):
        x = np.random.default_rng(seed).normal(size=300)
        a, b = spectrum(x), spectrum(c * x)
        assert b.f_m == pytest.approx(a.f_m, rel=1e-9)
        assert b.f_0 == a.f_0

    def test_am_detection(self):
        n = 400
        auto = Automation(0.5, 0.04)  # 2*omega_c/(2*pi) = 0.12
        m = TaskModel("T", "Automated", CobbDouglasFit(0.0, 0.5, 0.0, 1), automation=auto)
        z = ProductionSignal(np.zeros(n), timedelta(minutes=5), scale="log")
        y = ProductionSignal(np.full(n, 2.0), timedelta(minutes=5), scale="log")
        s = spectrum(run_task(m, z, z, y), window="rect")
        assert s.f_0 == pytest.approx(0.12, abs=1 / n)


class TestKappa:
    def test_equal(self):
        assert kappa(0.2, 0.2) == 0.0

    def test_improvement(self):
        k = kappa(4.64e-2, 1.11e-1)
        assert k == pytest.approx(1.3922, abs=1e-4)
        assert abs(k - 1.3917) <= 0.02

    def test_decline(self):
        k = kappa(1.35e-1, 1.20e-1)
        assert k == pytest.approx(-0.1111, abs=1e-4)
        assert abs(k - (-0.1152)) <= 0.02

    def test_zero_reference(self):
        with pytest.raises(UndefinedImprovementError):
            kappa(0.0, 0.1)


def _periodic(n, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return 3 * np.cos(2 * np.pi * 0.04 * t) + np.cos(2 * np.pi * 0.08 * t + 1) + 0.1 * rng.normal(size=n)


class TestCompare:
    def test_identity(self):
        sums = {"A": spectrum(_periodic(512)), "B": spectrum(tone(0.2, 512))}
        table = compare_logs(sums, sums)
        assert len(table) == 2
        assert all(r.kappa_m == 0 and r.kappa_0 == 0 for r in table)

    def test_time_compression(self):
        x = _periodic(4000)
        before = {"A": spectrum(x)}
        after = {"A": spectrum(x[::2])}
        row = compare_logs(before, after).get("A")
        assert row.kappa_0 == pytest.approx(1.0, abs=0.05)

    def test_pairing(self):
        a = {"A": spectrum(tone(0.125, 256))}
        b = {"A2": spectrum(tone(0.25, 256))}
        row = compare_logs(a, b, pairing={"A": "A2"}).get("A")
        assert row.kappa_0 == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(PairingError):
            compare_logs(a, b)

    def test_filtered_variant_rows(self):
        a = {"A": spectrum(tone(0.125, 256))}
        table = compare_logs(a, a, filtered_after={"A": spectrum(tone(0.1875, 256))})
        assert len(table) == 2
        assert table.get("A", filtered=True).kappa_0 == pytest.approx(0.5, abs=1e-12)
        with pytest.raises(PairingError):
            compare_logs(a, a, filtered_after={})

    def test_empty_before_gives_null_kappa(self):
        empty = {"A": spectrum(np.ones(64))}
        table = compare_logs(empty, {"A": spectrum(tone(0.1, 64))})
        assert table.get("A").kappa_m is None
        rows = json.loads(table.to_json())
        assert rows[0]["kappa_m"] is None
        assert table.to_csv().splitlines()[1].split(",")[5] == ""

    def test_table_serialization(self):
        a = {"A": spectrum(tone(0.1, 256))}
        csv_text = compare_logs(a, a).to_csv()
        assert csv_text.splitlines()[0].startswith("path,f_m_before,f_m_after")
        assert not math.isnan(json.loads(compare_logs(a, a).to_json())[0]["f_m_before"])
