import numpy as np
import pytest

from waverom.errors import AliasingError, ValidationError
from waverom.timedomain import (
    TraceSet,
    Wavelet,
    save_traces_csv,
    synthesize_traces,
    synthesize_traces_two_sided,
    wavelet_signal,
    wavelet_spectrum,
)


@pytest.fixture(params=["ricker", "modulated_gaussian"])
def wavelet(request):
    return Wavelet(kind=request.param, omega_peak=2 * np.pi * 10.0)


def test_spectrum_band_limits(wavelet):
    wp = wavelet.omega_peak
    peak = abs(wavelet_spectrum(wavelet, wp))
    assert abs(wavelet_spectrum(wavelet, 0.0)) <= 0.0100001 * peak
    if wavelet.kind == "modulated_gaussian":
        assert abs(wavelet_spectrum(wavelet, 2 * wp)) <= 0.0100001 * peak
    assert abs(wavelet_spectrum(wavelet, wavelet.cutoff)) <= 0.0105 * peak


def test_ricker_peak_modulus():
    w = Wavelet(kind="ricker", omega_peak=2 * np.pi * 8.0)
    expected = 2 / np.sqrt(np.pi) * np.exp(-1) / w.omega_peak
    assert np.isclose(abs(wavelet_spectrum(w, w.omega_peak)), expected, rtol=1e-12)
    assert wavelet_spectrum(w, 0.0) == 0.0


def test_time_shift_phase_only(wavelet):
    w2 = Wavelet(kind=wavelet.kind, omega_peak=wavelet.omega_peak, t0=wavelet.t0 + 0.1)
    om = np.linspace(1.0, 3 * wavelet.omega_peak, 50)
    a = wavelet_spectrum(wavelet, om)
    b = wavelet_spectrum(w2, om)
    assert np.allclose(np.abs(a), np.abs(b), rtol=1e-12)
    phase = np.angle(b / a)
    assert np.allclose(np.unwrap(phase), -om * 0.1, atol=1e-9)


def test_signal_matches_quadrature_oracle(wavelet):
    om = np.linspace(1e-6, 6 * wavelet.omega_peak, 20001)
    t = np.linspace(0.0, 0.4, 101)
    W = wavelet_spectrum(wavelet, om)
    oracle = np.trapezoid(
        W[None, :] * np.exp(1j * np.outer(t, om)), om, axis=1
    ).real / np.pi
    sig = wavelet_signal(wavelet, t)
    assert np.abs(oracle - sig).max() <= 1e-8 * np.abs(sig).max()


def test_identity_system_returns_wavelet(wavelet):
    n = 2400
    om = np.arange(1, n + 1) * (6 * wavelet.omega_peak / n)
    F = np.ones((n, 1, 1), dtype=complex)
    t = np.linspace(0.0, 0.4, 161)
    tr = synthesize_traces(om, F, wavelet, t)
    sig = wavelet_signal(wavelet, t)
    assert np.abs(tr.values[0, 0] - sig).max() <= 1e-4 * np.abs(sig).max()


def test_pure_delay(wavelet):
    n = 2400
    om = np.arange(1, n + 1) * (6 * wavelet.omega_peak / n)
    t = np.linspace(0.0, 0.6, 1201)
    dt = t[1] - t[0]
    T_arr = 0.2
    F = np.exp(-1j * om * T_arr)[:, None, None]
    tr0 = synthesize_traces(om, np.ones_like(F), wavelet, t)
    tr1 = synthesize_traces(om, F, wavelet, t)
    p0 = t[np.argmax(np.abs(tr0.values[0, 0]))]
    p1 = t[np.argmax(np.abs(tr1.values[0, 0]))]
    assert abs((p1 - p0) - T_arr) <= dt


def test_aliasing_guard(wavelet):
    om = np.linspace(1.0, 100.0, 20)  # spacing ~5.2 rad/s
    F = np.ones((20, 1, 1), dtype=complex)
    t = np.linspace(0.0, 2.0, 100)  # needs spacing <= pi/2
    with pytest.raises(AliasingError) as err:
        synthesize_traces(om, F, wavelet, t)
    assert err.value.required_spacing == pytest.approx(np.pi / 2.0)


def test_nonuniform_grid_rejected(wavelet):
    om = np.array([1.0, 2.0, 4.0])
    with pytest.raises(ValidationError):
        synthesize_traces(om, np.ones((3, 1, 1)), wavelet, np.linspace(0, 1, 5))


def test_parseval(wavelet):
    # time-domain energy vs (1/pi) int |F W|^2 for a smooth system
    n = 4000
    om = np.arange(1, n + 1) * (8 * wavelet.omega_peak / n)
    F = (1.0 / (1.0 + 1j * om / wavelet.omega_peak))[:, None, None]
    t = np.linspace(0.0, 6.0, 24001)
    tr = synthesize_traces(om, F, wavelet, t)
    e_time = np.trapezoid(tr.values[0, 0] ** 2, t)
    spec = np.abs(F[:, 0, 0] * wavelet_spectrum(wavelet, om)) ** 2
    e_freq = np.trapezoid(spec, om) / np.pi
    assert abs(e_time - e_freq) <= 1e-3 * e_freq


def test_quadrature_convergence(wavelet):
    t = np.linspace(0.0, 1.0, 501)
    T_arr = 0.3
    vals = []
    for n in (600, 1200):
        om = np.arange(1, n + 1) * (4 * wavelet.omega_peak / n)
        F = (np.exp(-1j * om * T_arr) / (1 + om / 50.0))[:, None, None]
        tr = synthesize_traces(om, F, wavelet, t)
        vals.append(tr.values[0, 0])
    rms = np.sqrt(np.mean((vals[0] - vals[1]) ** 2))
    assert rms <= 1e-3 * np.sqrt(np.mean(vals[1] ** 2))


def test_two_sided_reality():
    w = Wavelet(kind="ricker", omega_peak=2 * np.pi * 10.0)
    n = 800
    om = np.arange(1, n + 1) * (6 * w.omega_peak / n)
    F_plus = (np.exp(-1j * om * 0.15) / (1 + 1j * om / 100))[:, None, None]
    F_minus = np.conj(F_plus)
    t = np.linspace(0.0, 0.8, 400)
    tr = synthesize_traces_two_sided(om, F_plus, F_minus, w, t)
    v = tr.values[0, 0]
    assert np.abs(v.imag).max() <= 1e-12 * np.abs(v.real).max()
    one_sided = synthesize_traces(om, F_plus, w, t)
    assert np.allclose(v.real, one_sided.values[0, 0], atol=1e-12)


def test_traces_csv(tmp_path):
    t = np.linspace(0, 1, 11)
    values = np.random.default_rng(0).standard_normal((2, 2, 11))
    ts = TraceSet(times=t, values=values)
    path = tmp_path / "traces.csv"
    save_traces_csv(ts, path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "t_s,s0_r0,s0_r1,s1_r0,s1_r1"
    assert len(rows) == 12
    # deterministic: rewriting gives identical bytes
    path2 = tmp_path / "traces2.csv"
    save_traces_csv(ts, path2)
    assert path.read_bytes() == path2.read_bytes()
