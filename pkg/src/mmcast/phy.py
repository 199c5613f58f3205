"""Link budget, sectored antenna and per-packet decode probabilities.

Everything here is a pure function of frozen inputs. Decode probabilities
are cached per (phy, users, scheme, group) because the solvers and the
simulator ask for the same numbers many times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special, stats

from .errors import DomainError, NoCoverageError, NumericalError, ValidationError

TWO_PI = 2.0 * math.pi
SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0

# relative tolerance required of the fading expectation
QUAD_RTOL = 1e-6
# the packet-success curve is treated as exactly 0 / 1 outside this margin
_EDGE = 1e-17


@dataclass(frozen=True)
class PhyParams:
    tx_power: float = 1.0  # W
    carrier_freq: float = 28e9  # Hz
    bandwidth: float = 1e9  # Hz
    noise_figure: float = 7.6  # dB
    pathloss_exp: float = 3.0
    rx_gain: float = 11.83  # dB
    sidelobe_gain: float = 0.05
    min_beamwidth: float = math.radians(11.25)
    nakagami_m: float = 4.0
    payload_bits: int = 40_000
    overhead_bits: int = 100

    def __post_init__(self):
        if not 0.0 <= self.sidelobe_gain < 1.0:
            raise ValidationError(f"sidelobe_gain must lie in [0, 1), got {self.sidelobe_gain}")
        if not 0.0 < self.min_beamwidth <= TWO_PI:
            raise ValidationError(f"min_beamwidth must lie in (0, 2pi], got {self.min_beamwidth}")
        if self.pathloss_exp <= 0:
            raise ValidationError("pathloss_exp must be positive")
        if self.nakagami_m < 0.5:
            raise ValidationError("nakagami_m must be >= 0.5")
        for name in ("tx_power", "carrier_freq", "bandwidth"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.payload_bits <= 0 or self.overhead_bits < 0:
            raise ValidationError("payload_bits must be positive and overhead_bits non-negative")

    @property
    def packet_bits(self) -> int:
        return self.payload_bits + self.overhead_bits

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq


@dataclass(frozen=True)
class User:
    id: int
    radius: float  # m
    angle: float  # rad, in [0, 2pi)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError(f"user {self.id}: radius must be positive")
        if not 0.0 <= self.angle < TWO_PI:
            raise ValidationError(f"user {self.id}: angle must lie in [0, 2pi)")


@dataclass(frozen=True)
class ModScheme:
    name: str
    bits_per_symbol: int
    code_n: int
    code_k: int
    symbol_bits: int = 8

    def __post_init__(self):
        if self.bits_per_symbol not in (1, 2, 4, 6):
            raise ValidationError(f"{self.name}: bits_per_symbol must be one of 1, 2, 4, 6")
        if not 0 < self.code_k < self.code_n <= 2**self.symbol_bits - 1:
            raise ValidationError(f"{self.name}: need 0 < code_k < code_n <= 2^symbol_bits - 1")

    @property
    def rate(self) -> float:
        return self.code_k / self.code_n

    @property
    def correctable(self) -> int:
        return (self.code_n - self.code_k) // 2

    def blocks_per_packet(self, packet_bits: int) -> int:
        return math.ceil(packet_bits / (self.code_k * self.symbol_bits))


QAM4_239 = ModScheme("4-QAM 239/255", 2, 255, 239)
QAM16_223 = ModScheme("16-QAM 223/255", 4, 255, 223)
DEFAULT_SCHEMES = (QAM4_239, QAM16_223)


@dataclass(frozen=True)
class BeamGroup:
    members: tuple[int, ...]
    beamwidth: float
    boresight: float

    def __post_init__(self):
        if not self.members:
            raise ValidationError("beam group needs at least one member")
        if any(b <= a for a, b in zip(self.members, self.members[1:])):
            raise ValidationError(f"group members must be strictly increasing: {self.members}")

    def label(self) -> str:
        return "{" + ",".join(str(i) for i in self.members) + "}"


def tx_gain(beamwidth: float, z: float) -> float:
    """Sectored-antenna main-lobe gain for a beam of width ``beamwidth``.

    Total radiated power is conserved: main lobe over ``beamwidth`` plus
    side lobe gain ``z`` over the rest of the circle.
    """
    if not 0.0 < beamwidth <= TWO_PI:
        raise DomainError(f"beamwidth {beamwidth} outside (0, 2pi]")
    if not 0.0 <= z < 1.0:
        raise DomainError(f"side-lobe gain {z} outside [0, 1)")
    return (TWO_PI - (TWO_PI - beamwidth) * z) / beamwidth


def covering_arc(angles: Sequence[float]) -> tuple[float, float]:
    """Smallest arc containing all angles, as (start, span) in radians."""
    a = sorted(x % TWO_PI for x in angles)
    if len(a) == 1:
        return a[0], 0.0
    gaps = [a[i + 1] - a[i] for i in range(len(a) - 1)] + [a[0] + TWO_PI - a[-1]]
    j = max(range(len(gaps)), key=gaps.__getitem__)
    start = a[(j + 1) % len(a)]
    return start, TWO_PI - gaps[j]


def beamwidth_for(users: Sequence[User], min_beamwidth: float) -> tuple[float, float]:
    """(beamwidth, boresight) of the narrowest beam covering ``users``."""
    if not users:
        raise ValidationError("cannot build a beam for an empty group")
    start, span = covering_arc([u.angle for u in users])
    width = min(TWO_PI, max(min_beamwidth, span))
    return width, (start + span / 2.0) % TWO_PI


def make_group(users: Sequence[User], members: Sequence[int], phy: PhyParams) -> BeamGroup:
    by_id = {u.id: u for u in users}
    try:
        chosen = [by_id[i] for i in members]
    except KeyError as exc:
        raise ValidationError(f"unknown user id {exc.args[0]}") from None
    width, bore = beamwidth_for(chosen, phy.min_beamwidth)
    return BeamGroup(tuple(members), width, bore)


def covers(group: BeamGroup, user: User) -> bool:
    if group.beamwidth >= TWO_PI:
        return True
    off = (user.angle - group.boresight + math.pi) % TWO_PI - math.pi
    return abs(off) <= group.beamwidth / 2.0 + 1e-12


def noise_power_dbm(phy: PhyParams) -> float:
    return THERMAL_NOISE_DBM_HZ + phy.noise_figure + 10.0 * math.log10(phy.bandwidth)


def mean_snr(user: User, group: BeamGroup, phy: PhyParams) -> float:
    """Average (fading-free) SNR of ``user`` inside ``group``'s main lobe."""
    if not covers(group, user):
        raise NoCoverageError(f"user {user.id} outside beam {group.label()}")
    pl0 = (phy.wavelength / (4.0 * math.pi)) ** 2
    g_rc = 10.0 ** (phy.rx_gain / 10.0)
    g_tx = tx_gain(group.beamwidth, phy.sidelobe_gain)
    p_rx = phy.tx_power * g_tx * g_rc * pl0 * user.radius ** (-phy.pathloss_exp)
    noise_w = 10.0 ** ((noise_power_dbm(phy) - 30.0) / 10.0)
    return p_rx / noise_w


def bit_error_rate(snr, bits_per_symbol: int):
    """Gray-coded square QAM (BPSK for 1 bit) bit error rate at symbol SNR ``snr``."""
    snr = np.asarray(snr, dtype=float)
    if bits_per_symbol == 1:
        return 0.5 * special.erfc(np.sqrt(snr))
    order = 2**bits_per_symbol
    coef = (4.0 / bits_per_symbol) * (1.0 - 1.0 / math.sqrt(order))
    q = 0.5 * special.erfc(np.sqrt(3.0 * snr / (order - 1)) / math.sqrt(2.0))
    return np.minimum(0.5, coef * q)


def packet_success(snr, scheme: ModScheme, packet_bits: int):
    """Probability that every RS block of one MAC packet decodes over AWGN."""
    ber = bit_error_rate(snr, scheme.bits_per_symbol)
    p_sym = -np.expm1(scheme.symbol_bits * np.log1p(-ber))
    block_ok = stats.binom.cdf(scheme.correctable, scheme.code_n, p_sym)
    return block_ok ** scheme.blocks_per_packet(packet_bits)


@lru_cache(maxsize=None)
def _success_window(scheme: ModScheme, packet_bits: int) -> tuple[float, float]:
    """SNR interval outside which packet_success is 0 or 1 to within _EDGE."""

    def bisect(target_low: bool) -> float:
        lo, hi = -60.0, 80.0  # dB
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            s = float(packet_success(10.0 ** (mid / 10.0), scheme, packet_bits))
            ok = s <= _EDGE if target_low else s >= 1.0 - _EDGE
            if ok == target_low:
                lo = mid
            else:
                hi = mid
        return lo if target_low else hi

    return 10.0 ** (bisect(True) / 10.0), 10.0 ** (bisect(False) / 10.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _window_integral(scheme, packet_bits, shape, scale, lo, hi, panels):
    edges = np.linspace(math.log(lo), math.log(hi), panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    g = np.exp(u)
    # d(gamma) = gamma d(log gamma)
    f = stats.gamma.pdf(g, shape, scale=scale) * g
    return float(np.sum(w * f * packet_success(g, scheme, packet_bits)))


def faded_success(avg_snr: float, scheme: ModScheme, phy: PhyParams) -> float:
    """Packet success averaged over Nakagami-m fading with mean SNR ``avg_snr``.

    The received power is Gamma(m, avg/m). The success curve is a sharp step,
    so integration runs on the step's transition window only, with composite
    Gauss-Legendre in log-SNR; everything above the window counts as success.
    """
    if avg_snr <= 0.0:
        return 0.0
    if math.isinf(avg_snr):
        return 1.0
    shape = phy.nakagami_m
    scale = avg_snr / shape
    lo, hi = _success_window(scheme, phy.packet_bits)
    above = float(stats.gamma.sf(hi, shape, scale=scale))
    coarse = _window_integral(scheme, phy.packet_bits, shape, scale, lo, hi, 32)
    fine = _window_integral(scheme, phy.packet_bits, shape, scale, lo, hi, 64)
    if abs(fine - coarse) > QUAD_RTOL * max(fine + above, 1e-12):
        raise NumericalError(
            f"fading quadrature did not converge for {scheme.name} at mean SNR {avg_snr:g}"
        )
    return min(1.0, max(0.0, fine + above))


def decode_prob(
    scheme: ModScheme, group: BeamGroup, users: Sequence[User], phy: PhyParams
) -> dict[int, float]:
    """Per-member MAC-packet decode probability for a beam serving ``group``."""
    by_id = {u.id: u for u in users}
    return {
        i: _member_decode_prob(scheme, group, by_id[i], phy) for i in group.members
    }


@lru_cache(maxsize=65536)
def _member_decode_prob(scheme, group, user, phy) -> float:
    return faded_success(mean_snr(user, group, phy), scheme, phy)


def group_decode_prob(
    scheme: ModScheme, group: BeamGroup, users: Sequence[User], phy: PhyParams
) -> float:
    """Worst-member decode probability, used when a beam has one shared draw."""
    return min(decode_prob(scheme, group, users, phy).values())


def packet_duration(scheme: ModScheme, phy: PhyParams) -> float:
    """Airtime of one MAC packet, symbol rate equal to the bandwidth."""
    return phy.packet_bits / (phy.bandwidth * scheme.bits_per_symbol * scheme.rate)
