"""Source wavelets and inverse-Fourier synthesis of time traces.

Traces come from the one-sided spectral integral

    f(t) = (1/pi) * Re  int_0^wmax  F(i w) W(w) e^{i w t} dw

by trapezoid quadrature; the Schwarz reflection symmetry of the transfer
sweep supplies the negative-frequency half implicitly, so synthesized
traces are real by construction.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .errors import AliasingError, DimensionError, ValidationError
from .util import format_float

_LN100 = np.log(100.0)


@dataclass(frozen=True)
class Wavelet:
    """Band-limited source signature.

    kind 'ricker' peaks at omega_peak with the classic w^2 exp(-w^2/wp^2)
    spectrum; 'modulated_gaussian' is a Gaussian bump centered at
    omega_peak whose width puts the spectrum at DC and at 2*omega_peak at
    1% of the peak.  t0 shifts the signal so it effectively starts at
    t = 0 (the envelope is below 1% before that).
    """

    kind: str
    omega_peak: float
    t0: float = None

    def __post_init__(self):
        if self.kind not in ("ricker", "modulated_gaussian"):
            raise ValidationError(f"unknown wavelet kind '{self.kind}'")
        if not (self.omega_peak > 0):
            raise ValidationError("omega_peak must be positive")
        if self.t0 is None:
            if self.kind == "ricker":
                t0 = 2.0 * np.sqrt(_LN100) / self.omega_peak
            else:
                t0 = 2.0 * _LN100 / self.omega_peak
            object.__setattr__(self, "t0", float(t0))

    @property
    def sigma_omega(self):
        """Spectral width of the modulated Gaussian."""
        return self.omega_peak / np.sqrt(2.0 * _LN100)

    @property
    def cutoff(self):
        """Upper frequency where the spectrum falls to 1% of its peak.

        2*omega_peak for the modulated Gaussian by construction; the
        Ricker bump decays more slowly (1% near 2.77*omega_peak).
        """
        if self.kind == "ricker":
            return 2.77 * self.omega_peak
        return 2.0 * self.omega_peak

    @property
    def half_width(self):
        """Time half-width below which the envelope is under 1% of peak."""
        if self.kind == "ricker":
            return 2.0 * np.sqrt(_LN100) / self.omega_peak
        return np.sqrt(2.0 * _LN100) / self.sigma_omega


def wavelet_spectrum(wavelet, omega):
    """Closed-form spectrum W(omega) for real omega >= 0."""
    w = np.asarray(omega, dtype=np.float64)
    wp = wavelet.omega_peak
    shift = np.exp(-1j * w * wavelet.t0)
    if wavelet.kind == "ricker":
        mag = (2.0 / np.sqrt(np.pi)) * (w**2 / wp**3) * np.exp(-(w**2) / wp**2)
    else:
        sig = wavelet.sigma_omega
        mag = np.exp(-((w - wp) ** 2) / (2.0 * sig**2))
    return mag * shift


def wavelet_signal(wavelet, t):
    """Time signal matching the synthesis convention (1/pi) Re int_0^inf."""
    tau = np.asarray(t, dtype=np.float64) - wavelet.t0
    wp = wavelet.omega_peak
    if wavelet.kind == "ricker":
        q = 0.25 * wp**2 * tau**2
        return (1.0 - 2.0 * q) * np.exp(-q) / (2.0 * np.pi)
    # Modulated Gaussian: the half-line integral has an erfc closed form.
    sig = wavelet.sigma_omega
    z = -wp / (sig * np.sqrt(2.0)) - 1j * sig * tau / np.sqrt(2.0)
    val = (
        sig
        * np.sqrt(2.0)
        * np.exp(1j * wp * tau)
        * np.exp(-0.5 * sig**2 * tau**2)
        * (np.sqrt(np.pi) / 2.0)
        * erfc(z)
    )
    return val.real / np.pi


@dataclass(frozen=True)
class TraceSet:
    """Real time traces per (source, receiver) pair on a uniform time grid."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)  # (n_src, n_rec, n_t)

    @property
    def n_pairs(self):
        return self.values.shape[0] * self.values.shape[1]

    def rms(self):
        return float(np.sqrt(np.mean(self.values**2)))


def _check_uniform(omegas):
    omegas = np.asarray(omegas, dtype=np.float64)
    if omegas.ndim != 1 or omegas.size < 2:
        raise ValidationError("need a 1D grid of at least two frequencies")
    d = np.diff(omegas)
    if np.any(d <= 0) or (d.max() - d.min()) > 1e-9 * d.max():
        raise ValidationError("frequency grid must be uniform and increasing")
    return omegas, float(d[0])


def synthesize_traces(omegas, transfer_values, wavelet, times):
    """Trapezoid inverse transform of a transfer sweep on the i*omega axis.

    transfer_values has shape (n_omega, n_src, n_rec).  The sweep spacing
    must satisfy  d_omega <= pi / t_max  (Nyquist for the observation
    window); otherwise an AliasingError reports the required spacing.
    A zero sample at omega = 0 is implied (both wavelet kinds are at or
    below 1% of peak there).
    """
    omegas, d_om = _check_uniform(omegas)
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(transfer_values, dtype=np.complex128)
    if values.shape[0] != omegas.size:
        raise DimensionError("transfer sweep and frequency grid length mismatch")
    t_max = float(np.max(np.abs(times)))
    required = np.pi / t_max if t_max > 0 else np.inf
    if d_om > required * (1.0 + 1e-12):
        raise AliasingError(
            f"frequency spacing {d_om:.6g} exceeds pi/T_window = {required:.6g}",
            required_spacing=required,
        )

    W = wavelet_spectrum(wavelet, omegas)
    integrand = values * W[:, None, None]
    if omegas[0] > 0:
        omegas = np.concatenate([[0.0], omegas])
        integrand = np.concatenate(
            [np.zeros((1,) + integrand.shape[1:], dtype=integrand.dtype), integrand]
        )
    weights = np.empty_like(omegas)
    weights[1:-1] = 0.5 * (omegas[2:] - omegas[:-2])
    weights[0] = 0.5 * (omegas[1] - omegas[0])
    weights[-1] = 0.5 * (omegas[-1] - omegas[-2])

    phases = np.exp(1j * np.outer(omegas, times))  # (n_w, n_t)
    weighted = integrand * weights[:, None, None]
    traces = np.einsum("wij,wt->ijt", weighted, phases).real / np.pi
    return TraceSet(times=times, values=traces)


def synthesize_traces_two_sided(omegas, f_plus, f_minus, wavelet, times):
    """Complex two-sided synthesis without assuming Schwarz symmetry.

    f_plus holds F(i w), f_minus holds F(-i w) on the same positive grid.
    The imaginary part of the result measures how well the sweep honors
    F(-i w) = conj(F(i w)); callers discard it after checking.
    """
    omegas, _ = _check_uniform(omegas)
    f_plus = np.asarray(f_plus, dtype=np.complex128)
    f_minus = np.asarray(f_minus, dtype=np.complex128)
    if f_plus.shape != f_minus.shape or f_plus.shape[0] != omegas.size:
        raise DimensionError("two-sided sweeps must share the frequency grid")
    times = np.asarray(times, dtype=np.float64)
    if omegas[0] > 0:
        pad = np.zeros((1,) + f_plus.shape[1:], dtype=np.complex128)
        f_plus = np.concatenate([pad, f_plus])
        f_minus = np.concatenate([pad, f_minus])
        omegas = np.concatenate([[0.0], omegas])
    W = wavelet_spectrum(wavelet, omegas)
    weights = np.empty_like(omegas)
    weights[1:-1] = 0.5 * (omegas[2:] - omegas[:-2])
    weights[0] = 0.5 * (omegas[1] - omegas[0])
    weights[-1] = 0.5 * (omegas[-1] - omegas[-2])
    up = f_plus * W[:, None, None] * weights[:, None, None]
    dn = f_minus * np.conj(W)[:, None, None] * weights[:, None, None]
    e_plus = np.exp(1j * np.outer(omegas, times))
    traces = (
        np.einsum("wij,wt->ijt", up, e_plus)
        + np.einsum("wij,wt->ijt", dn, np.conj(e_plus))
    ) / (2.0 * np.pi)
    return TraceSet(times=times, values=traces)


def save_traces_csv(traces, path, sources=None, receivers=None):
    """Wide CSV: time column plus one column per (source, receiver) pair."""
    n_s, n_r, _ = traces.values.shape
    header = ["t_s"] + [f"s{i}_r{j}" for i in range(n_s) for j in range(n_r)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(traces.times):
            row = [format_float(t)] + [
                format_float(np.real(traces.values[i, j, k]))
                for i in range(n_s)
                for j in range(n_r)
            ]
            writer.writerow(row)
