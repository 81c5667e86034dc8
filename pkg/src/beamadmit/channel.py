"""Scenario geometry and block-fading channel synthesis.

All randomness is drawn from counter-based Philox streams keyed by
(seed, stream tag, indices...) through numpy's SeedSequence, so every draw is
a pure function of its indices and reproduces bit-identically across
processes and worker counts. Complex Gaussians are generated by an explicit
polar transform of two uniforms (h = sigma*sqrt(-ln u1)*exp(2i*pi*u2)), not by
the generator's own normal sampler, to keep the mapping documented and stable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import CellGeometry, ConfigurationError

# Stream tags; distinct tags give independent Philox streams for one seed.
TAG_PLACE = 1
TAG_SHADOW = 2
TAG_HORIZON = 3
TAG_FUTURE = 4
TAG_SLICE = 5
TAG_TRIAL = 6

_SQ3_2 = np.sqrt(3.0) / 2.0
# Slab normals of a regular hexagon with a corner on the +x axis.
_HEX_AXES = np.array([[_SQ3_2, 0.5], [0.0, 1.0], [-_SQ3_2, 0.5]])


def _rng(*key):
    """Philox generator for a stream addressed by an integer tuple."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def derive_seed(seed, tag, *indices):
    """Fold (seed, tag, indices...) into a single substream seed."""
    return int(np.random.SeedSequence((int(seed), tag) + tuple(int(i) for i in indices))
               .generate_state(1, np.uint64)[0])


def in_hexagon(points, radius):
    """True for points inside the hexagon of circumradius `radius` (corner on +x)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    proj = np.abs(pts @ _HEX_AXES.T)
    return np.all(proj <= radius * _SQ3_2 + 1e-12, axis=1)


@dataclass(frozen=True)
class Scenario:
    """Placed users inside one hexagonal cell; BS at the origin."""

    geometry: CellGeometry
    positions: np.ndarray        # (M, 2) user coordinates, meters
    seed: int

    @property
    def num_users(self):
        return self.positions.shape[0]

    def distances(self):
        return np.linalg.norm(self.positions, axis=1)


@dataclass(frozen=True)
class ChannelSet:
    """One horizon of block-fading channels plus the per-user statistics."""

    H: np.ndarray            # (T, N, M) complex
    variances: np.ndarray    # (M,) per-user entry variance, constant over t
    shadow: np.ndarray       # (M,) linear shadowing factors
    seed: int

    @property
    def num_slices(self):
        return self.H.shape[0]

    @property
    def num_antennas(self):
        return self.H.shape[1]

    @property
    def num_users(self):
        return self.H.shape[2]


def place_users(geometry: CellGeometry, num_users, seed):
    """Drop users uniformly in the hexagon, rejection-sampled from its bounding box.

    Draws are resampled until inside the hexagon and at least
    min_user_distance_m away from the BS at the center; more than 1e4 attempts
    for one user means the cell is effectively too small.
    """
    radius = geometry.corner_distance_m
    gen = _rng(seed, TAG_PLACE)
    positions = np.empty((num_users, 2))
    for m in range(num_users):
        for _ in range(10_000):
            point = gen.random(2) * [2 * radius, 2 * radius * _SQ3_2] \
                - [radius, radius * _SQ3_2]
            if in_hexagon(point, radius)[0] \
                    and np.linalg.norm(point) >= geometry.min_user_distance_m:
                positions[m] = point
                break
        else:
            raise ConfigurationError(
                "user placement failed after 10000 attempts; "
                "min_user_distance_m leaves no room in the cell")
    return Scenario(geometry=geometry, positions=positions, seed=int(seed))


def channel_variance(distance_m, shadow_linear, geometry: CellGeometry):
    """Per-entry channel variance: shadow * (ref_distance / distance)^pathloss_exp."""
    distance_m = np.asarray(distance_m, dtype=float)
    shadow_linear = np.asarray(shadow_linear, dtype=float)
    if np.any(distance_m <= 0) or np.any(shadow_linear <= 0):
        raise ConfigurationError("distance and shadow factor must be > 0")
    return shadow_linear * (geometry.reference_distance_m / distance_m) ** geometry.pathloss_exponent


def _standard_normals(gen, n):
    """n standard normals via the Box-Muller polar transform."""
    u = gen.random((n, 2))
    return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


def shadow_factors(num_users, seed, std_db):
    """Linear log-normal shadow factors: 10*log10(factor) ~ N(0, std_db^2)."""
    z = _standard_normals(_rng(seed, TAG_SHADOW), num_users)
    return 10.0 ** (std_db * z / 10.0)


def _complex_column(gen, n, variance):
    """n-vector of CN(0, variance) entries from one substream."""
    u = gen.random((n, 2))
    mag = np.sqrt(variance) * np.sqrt(-np.log1p(-u[:, 0]))
    return mag * np.exp(2j * np.pi * u[:, 1])


def _draw_matrix(seed, tag, block_index, variances, num_antennas):
    """One (N, M) channel matrix; column m comes from stream (seed, tag, block, m)."""
    M = len(variances)
    H = np.empty((num_antennas, M), dtype=complex)
    for m in range(M):
        H[:, m] = _complex_column(_rng(seed, tag, block_index, m), num_antennas, variances[m])
    return H


def sample_horizon(scenario: Scenario, num_antennas, num_slices, seed):
    """T independent channel draws per user with slice-constant variances.

    Users are static over the horizon, so the per-user variance is computed
    once from the placement distance and the shadow factor.
    """
    shadow = shadow_factors(scenario.num_users, seed, scenario.geometry.shadow_std_db)
    variances = channel_variance(scenario.distances(), shadow, scenario.geometry)
    H = np.stack([_draw_matrix(seed, TAG_HORIZON, t, variances, num_antennas)
                  for t in range(num_slices)])
    return ChannelSet(H=H, variances=variances, shadow=shadow, seed=int(seed))


def sample_future(variances, num_antennas, num_samples, seed):
    """num_samples i.i.d. (N, M) matrices from the horizon's distribution.

    Uses a stream tag distinct from sample_horizon, so future samples never
    collide with realized slices even under the same seed.
    """
    variances = np.asarray(variances, dtype=float)
    if num_samples < 1:
        raise ConfigurationError("num_samples must be >= 1")
    return np.stack([_draw_matrix(seed, TAG_FUTURE, j, variances, num_antennas)
                     for j in range(num_samples)])


def dump_channels(channels: ChannelSet, path):
    """Write the horizon as CSV rows (t, m, antenna, re, im) for cross-checks."""
    T, N, M = channels.H.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "m", "antenna", "re", "im"])
        for t in range(T):
            for m in range(M):
                for a in range(N):
                    h = channels.H[t, a, m]
                    writer.writerow([t, m, a, f"{h.real:.17g}", f"{h.imag:.17g}"])


def load_channels(path):
    """Read a dump_channels CSV back into a (T, N, M) complex array."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["t", "m", "antenna"]:
            raise ConfigurationError(f"unexpected channel CSV header in {path}")
        for t, m, a, re, im in reader:
            rows.append((int(t), int(m), int(a), float(re), float(im)))
    T = max(r[0] for r in rows) + 1
    M = max(r[1] for r in rows) + 1
    N = max(r[2] for r in rows) + 1
    H = np.zeros((T, N, M), dtype=complex)
    for t, m, a, re, im in rows:
        H[t, a, m] = re + 1j * im
    return H
