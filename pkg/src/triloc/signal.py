"""Ultrasonic ranging front-end.

Zadoff-Chu probe sequences, a sampled delay-and-noise channel, and a
correlation-peak range estimator with sub-sample parabolic refinement.
Links are simulated independently; each transmitter gets its own root so
the sequences stay separable at the receiver.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.signal import fftconvolve

from .errors import FrameOverflow, NoPeak, NotCoprime

GUARD_SAMPLES = 64  # trailing silence appended to every frame
PEAK_FACTOR = 3.0  # detection threshold as a multiple of the noise floor


@dataclass(frozen=True)
class SignalParams:
    """Physical and waveform constants for the ranging model.

    psi and sigma are 3x4 per-link attenuation factors and noise standard
    deviations (transmitters x beacons).  sigma may be zero for noiseless
    studies.
    """

    K: int = 151
    roots: tuple[int, int, int] = (1, 2, 3)
    ts: float = 1e-6
    c: float = 343.0
    psi: np.ndarray | None = None
    sigma: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ValueError("sequence length K must be at least 2")
        if len(self.roots) != 3:
            raise ValueError("need one root per transmitter")
        for r in self.roots:
            if gcd(int(r), self.K) != 1:
                raise NotCoprime(f"root {r} shares a factor with K={self.K}")
        if self.ts <= 0 or self.c <= 0:
            raise ValueError("ts and c must be positive")
        psi = np.ones((3, 4)) if self.psi is None else np.asarray(self.psi, float)
        sigma = np.ones((3, 4)) if self.sigma is None else np.asarray(self.sigma, float)
        if psi.shape != (3, 4) or sigma.shape != (3, 4):
            raise ValueError("psi and sigma must be 3x4 arrays")
        if not np.all(psi > 0):
            raise ValueError("attenuation factors must be positive")
        if not np.all(sigma >= 0):
            raise ValueError("noise levels must be nonnegative")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "sigma", sigma)

    def with_snr(self, snr_db: float) -> "SignalParams":
        """Same waveform with sigma set so each link has the given SNR.

        Per-link SNR is psi^2/sigma^2 for unit-modulus symbols, so
        sigma = psi * 10^(-snr_db/20).
        """
        return SignalParams(
            K=self.K,
            roots=self.roots,
            ts=self.ts,
            c=self.c,
            psi=self.psi,
            sigma=self.psi * 10.0 ** (-snr_db / 20.0),
        )


@dataclass(frozen=True)
class ZcSequence:
    """Unit-modulus Zadoff-Chu sequence of length K with root R."""

    K: int
    R: int
    symbols: np.ndarray


def zadoff_chu(K: int, R: int) -> ZcSequence:
    """Zadoff-Chu sequence; phase pi*R*k*(k+1)/K for odd K, pi*R*k^2/K for even.

    Raises:
        NotCoprime: if gcd(R, K) != 1, which would break the flat
            periodic autocorrelation.
    """
    if K < 2:
        raise ValueError("sequence length K must be at least 2")
    if gcd(int(R), int(K)) != 1:
        raise NotCoprime(f"root {R} shares a factor with K={K}")
    k = np.arange(K)
    if K % 2:
        phase = np.pi * R * k * (k + 1) / K
    else:
        phase = np.pi * R * k**2 / K
    return ZcSequence(K=int(K), R=int(R), symbols=np.exp(1j * phase))


@dataclass(frozen=True)
class ReceivedFrame:
    """Sampled receiver output for one transmitter-beacon link."""

    samples: np.ndarray
    true_delay: int
    link: tuple[int, int]


def simulate_link(
    seq: ZcSequence,
    range_m: float,
    sig: SignalParams,
    rng: np.random.Generator,
    link: tuple[int, int] = (0, 0),
    max_delay: int | None = None,
) -> ReceivedFrame:
    """Delay the sequence by the propagation time and add receiver noise.

    The delay is range/(c*ts) rounded to the nearest sample.  Noise is
    circular complex Gaussian with per-component variance sigma^2/2.
    Passing max_delay fixes the frame length across links so a whole
    scenario shares one frame size.

    Raises:
        FrameOverflow: if the delayed sequence does not fit in the frame.
    """
    if range_m <= 0:
        raise ValueError("range must be positive")
    tau = int(round(range_m / (sig.c * sig.ts)))
    length = (max_delay if max_delay is not None else tau) + seq.K + GUARD_SAMPLES
    if tau + seq.K > length:
        raise FrameOverflow(
            f"delay {tau} plus sequence length {seq.K} exceeds frame length {length}"
        )
    psi = sig.psi[link]
    sigma = sig.sigma[link]
    samples = np.zeros(length, dtype=complex)
    samples[tau : tau + seq.K] = psi * seq.symbols
    if sigma > 0:
        noise = rng.standard_normal(length) + 1j * rng.standard_normal(length)
        samples = samples + (sigma / np.sqrt(2.0)) * noise
    return ReceivedFrame(samples=samples, true_delay=tau, link=tuple(link))


def estimate_range(frame: ReceivedFrame, seq: ZcSequence, sig: SignalParams) -> float:
    """Correlation-peak range estimate with parabolic sub-sample refinement.

    Cross-correlates the frame against the conjugate sequence, finds the
    magnitude peak over all whole-sequence alignments, refines the lag
    with a 3-point parabola, and scales by c*ts.

    Raises:
        NoPeak: if the peak does not clear PEAK_FACTOR times the noise
            floor (mean plus two standard deviations of the correlation
            magnitude).
    """
    full = fftconvolve(frame.samples, np.conj(seq.symbols[::-1]), mode="full")
    # index m of this slice is the candidate integer delay
    corr = np.abs(full[seq.K - 1 : len(frame.samples)])
    peak = int(np.argmax(corr))
    floor = float(np.mean(corr) + 2.0 * np.std(corr))
    if corr[peak] < PEAK_FACTOR * floor:
        raise NoPeak(
            f"max correlation {corr[peak]:.3g} below {PEAK_FACTOR} x floor {floor:.3g}"
        )
    lag = float(peak)
    if 0 < peak < len(corr) - 1:
        lo, mid, hi = corr[peak - 1], corr[peak], corr[peak + 1]
        denom = lo - 2.0 * mid + hi
        if denom < 0:
            shift = 0.5 * (lo - hi) / denom
            lag += float(np.clip(shift, -0.5, 0.5))
    return lag * sig.c * sig.ts
