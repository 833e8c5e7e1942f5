"""System configuration: geometry, path loss and reproducible random streams.

A scenario fixes everything that is static over a simulation run: the BS
records (antennas, users, power budget, Rician factor, carrier band), the
RIS size and position, noise variances, QoS thresholds, and the large-scale
propagation constants.  All angles are stored in radians internally; the
JSON config format uses degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateBand, InvalidDimension, NonPositiveQuantity

__all__ = [
    "UserConfig",
    "BsConfig",
    "ScenarioConfig",
    "Geometry",
    "Scenario",
    "RngStream",
    "build_scenario",
    "path_loss",
    "make_streams",
    "load_scenario_config",
    "scenario_config_to_dict",
    "ring_scenario",
]


@dataclass(frozen=True)
class UserConfig:
    """One single-antenna user served by a BS."""

    position_m: tuple[float, float]
    qos_threshold_db: float = 5.0
    # Optional overrides; by default angles are derived from positions and
    # elevations are zero (2-D layout).
    azimuth_rad: float | None = None
    elevation_rad: float = 0.0
    noise_variance_w: float | None = None


@dataclass(frozen=True)
class BsConfig:
    """One multi-antenna BS operating in its own frequency band."""

    num_antennas: int
    total_power_w: float
    rician_factor: float
    carrier_band_id: int
    position_m: tuple[float, float]
    users: tuple[UserConfig, ...]
    # Rician factor of the RIS->user links.  None means "same as the BS-RIS
    # factor"; math.inf selects the pure line-of-sight limit.
    user_rician_factor: float | None = None
    azimuth_rad: float | None = None
    elevation_rad: float = 0.0

    @property
    def num_users(self) -> int:
        return len(self.users)


@dataclass(frozen=True)
class ScenarioConfig:
    ris_elements: int
    bs: tuple[BsConfig, ...]
    ris_position_m: tuple[float, float] = (0.0, 0.0)
    noise_variance_w: float = 1.0
    path_loss_exponent_bs_ris: float = 2.2
    path_loss_exponent_ris_user: float = 2.2
    reference_gain_db: float = -30.0


@dataclass(frozen=True)
class Geometry:
    """Distances and steering angles derived from the 2-D positions.

    Per BS s: ``bs_ris_distance_m[s]``, arrival angles at the RIS
    (``phi_r_az/el``) and departure angles at the BS (``phi_t_az/el``).
    Per user k of BS s: ``ris_user_distance_m[s][k]`` and the RIS-side
    angles ``phi_ir_az/el[s][k]``.
    """

    bs_ris_distance_m: np.ndarray
    phi_r_az: np.ndarray
    phi_r_el: np.ndarray
    phi_t_az: np.ndarray
    phi_t_el: np.ndarray
    ris_user_distance_m: tuple[np.ndarray, ...]
    phi_ir_az: tuple[np.ndarray, ...]
    phi_ir_el: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class Scenario:
    """Validated system description plus derived geometry and path losses."""

    config: ScenarioConfig
    geometry: Geometry
    bs_ris_gain: np.ndarray           # l_s per BS (amplitude-domain factor)
    ris_user_gain: tuple[np.ndarray, ...]  # l_k per user, per BS

    @property
    def num_bs(self) -> int:
        return len(self.config.bs)

    @property
    def ris_elements(self) -> int:
        return self.config.ris_elements

    def bs_conf(self, s: int) -> BsConfig:
        return self.config.bs[s]

    def noise_variance(self, s: int, k: int) -> float:
        override = self.config.bs[s].users[k].noise_variance_w
        return self.config.noise_variance_w if override is None else override

    def qos_thresholds_db(self, s: int) -> np.ndarray:
        return np.array([u.qos_threshold_db for u in self.config.bs[s].users])

    def user_rician_factor(self, s: int) -> float:
        bs = self.config.bs[s]
        return bs.rician_factor if bs.user_rician_factor is None else bs.user_rician_factor


@dataclass(frozen=True)
class RngStream:
    """Reproducible, statistically independent random stream.

    Identical ``(seed, stream_id)`` pairs reproduce identical sequences;
    ``substream`` derives a per-trial generator so Monte Carlo trials can be
    evaluated in any order (or in parallel) without changing the draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))

    def substream(self, index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, index))
        )


def path_loss(distance_m: float, exponent: float, reference_gain_db: float) -> float:
    """Amplitude-domain large-scale gain ``10^(G0/10) * d^(-a)``.

    ``G0`` is the gain at 1 m in dB.  Exponent 0 with 0 dB gain yields the
    normalized-distance (unit gain) setting used by several experiments.
    """
    if distance_m <= 0:
        raise NonPositiveQuantity(f"distance must be > 0, got {distance_m}")
    return 10.0 ** (reference_gain_db / 10.0) * distance_m ** (-exponent)


def _angles_to(origin: np.ndarray, target: np.ndarray) -> float:
    d = target - origin
    return math.atan2(d[1], d[0])


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Validate a config and derive geometry and large-scale gains.

    Raises InvalidDimension when any BS has fewer than K + 2 antennas (the
    inverse-Wishart mean used by the closed forms needs N - K - 1 > 0),
    NonPositiveQuantity for non-positive powers/variances/distances, and
    DuplicateBand when two BSs share a carrier band.
    """
    if config.ris_elements < 1:
        raise NonPositiveQuantity("ris_elements must be >= 1")
    if not config.bs:
        raise NonPositiveQuantity("at least one BS is required")
    if config.noise_variance_w <= 0:
        raise NonPositiveQuantity("noise variance must be > 0")

    bands = [b.carrier_band_id for b in config.bs]
    if len(set(bands)) != len(bands):
        raise DuplicateBand(f"carrier_band_id values must be distinct, got {bands}")

    ris = np.asarray(config.ris_position_m, dtype=float)
    bs_dist = []
    phi_r_az, phi_t_az = [], []
    phi_r_el, phi_t_el = [], []
    user_dist, phi_ir_az, phi_ir_el = [], [], []
    l_s, l_users = [], []

    for s, bs in enumerate(config.bs):
        if bs.num_users < 1:
            raise NonPositiveQuantity(f"BS {s} has no users")
        if bs.num_antennas < bs.num_users + 2:
            raise InvalidDimension(
                f"BS {s}: N={bs.num_antennas} must be >= K+2={bs.num_users + 2}"
            )
        if bs.total_power_w <= 0:
            raise NonPositiveQuantity(f"BS {s}: total power must be > 0")
        if bs.rician_factor < 0:
            raise NonPositiveQuantity(f"BS {s}: Rician factor must be >= 0")
        if bs.user_rician_factor is not None and bs.user_rician_factor < 0:
            raise NonPositiveQuantity(f"BS {s}: user Rician factor must be >= 0")

        pos = np.asarray(bs.position_m, dtype=float)
        d = float(np.linalg.norm(pos - ris))
        if d <= 0:
            raise NonPositiveQuantity(f"BS {s} sits on top of the RIS")
        bs_dist.append(d)
        az = bs.azimuth_rad if bs.azimuth_rad is not None else _angles_to(ris, pos)
        phi_r_az.append(az)                      # arrival at the RIS
        phi_t_az.append(_angles_to(pos, ris))    # departure at the BS
        phi_r_el.append(bs.elevation_rad)
        phi_t_el.append(bs.elevation_rad)
        l_s.append(path_loss(d, config.path_loss_exponent_bs_ris, config.reference_gain_db))

        ud, ua, ue, lk = [], [], [], []
        for k, u in enumerate(bs.users):
            upos = np.asarray(u.position_m, dtype=float)
            dk = float(np.linalg.norm(upos - ris))
            if dk <= 0:
                raise NonPositiveQuantity(f"BS {s} user {k} sits on top of the RIS")
            if u.noise_variance_w is not None and u.noise_variance_w <= 0:
                raise NonPositiveQuantity(f"BS {s} user {k}: noise variance must be > 0")
            ud.append(dk)
            ua.append(u.azimuth_rad if u.azimuth_rad is not None else _angles_to(ris, upos))
            ue.append(u.elevation_rad)
            lk.append(path_loss(dk, config.path_loss_exponent_ris_user, config.reference_gain_db))
        user_dist.append(np.array(ud))
        phi_ir_az.append(np.array(ua))
        phi_ir_el.append(np.array(ue))
        l_users.append(np.array(lk))

    geometry = Geometry(
        bs_ris_distance_m=np.array(bs_dist),
        phi_r_az=np.array(phi_r_az),
        phi_r_el=np.array(phi_r_el),
        phi_t_az=np.array(phi_t_az),
        phi_t_el=np.array(phi_t_el),
        ris_user_distance_m=tuple(user_dist),
        phi_ir_az=tuple(phi_ir_az),
        phi_ir_el=tuple(phi_ir_el),
    )
    return Scenario(
        config=config,
        geometry=geometry,
        bs_ris_gain=np.array(l_s),
        ris_user_gain=tuple(l_users),
    )


def _fold_from_endfire(angle: float, min_cos: float = 0.5) -> float:
    """Move an azimuth to the nearest direction with |cos| >= min_cos.

    Half-wavelength linear arrays resolve directions through sin(azimuth),
    so user fans centered near +-90 deg collapse onto one steering vector.
    """
    a = math.atan2(math.sin(angle), math.cos(angle))  # wrap to (-pi, pi]
    limit = math.acos(min_cos)
    if abs(math.cos(a)) >= min_cos:
        return a
    if a >= 0:
        # between limit and pi - limit: snap to the closer boundary
        return limit if a < math.pi / 2 else math.pi - limit
    return -limit if a > -math.pi / 2 else -(math.pi - limit)


def make_streams(master_seed: int, count: int) -> list[RngStream]:
    """Independent reproducible streams derived from one master seed."""
    if count < 1:
        raise NonPositiveQuantity("count must be >= 1")
    return [RngStream(seed=master_seed, stream_id=i) for i in range(count)]


# ---------------------------------------------------------------------------
# JSON config format (angles in degrees in the file, radians internally)
# ---------------------------------------------------------------------------

def _user_from_dict(d: dict) -> UserConfig:
    return UserConfig(
        position_m=tuple(d["position_m"]),
        qos_threshold_db=float(d.get("qos_threshold_db", 5.0)),
        azimuth_rad=math.radians(d["azimuth_deg"]) if "azimuth_deg" in d else None,
        elevation_rad=math.radians(d.get("elevation_deg", 0.0)),
        noise_variance_w=d.get("noise_variance_w"),
    )


def _bs_from_dict(d: dict) -> BsConfig:
    kappa_u = d.get("user_rician_factor")
    if isinstance(kappa_u, str):
        if kappa_u.lower() not in ("inf", "infinity"):
            raise ValueError(f"user_rician_factor string must be 'inf', got {kappa_u!r}")
        kappa_u = math.inf
    return BsConfig(
        num_antennas=int(d["num_antennas"]),
        total_power_w=float(d["total_power_w"]),
        rician_factor=float(d["rician_factor"]),
        carrier_band_id=int(d["carrier_band_id"]),
        position_m=tuple(d["position_m"]),
        users=tuple(_user_from_dict(u) for u in d["users"]),
        user_rician_factor=kappa_u,
        azimuth_rad=math.radians(d["azimuth_deg"]) if "azimuth_deg" in d else None,
        elevation_rad=math.radians(d.get("elevation_deg", 0.0)),
    )


def load_scenario_config(source: str | Path | dict) -> ScenarioConfig:
    """Read a ScenarioConfig from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        with open(source) as f:
            data = json.load(f)
    else:
        data = source
    pl = data.get("path_loss", {})
    return ScenarioConfig(
        ris_elements=int(data["ris"]["elements"]),
        ris_position_m=tuple(data["ris"].get("position_m", (0.0, 0.0))),
        noise_variance_w=float(data.get("noise_variance_w", 1.0)),
        path_loss_exponent_bs_ris=float(pl.get("exponent_bs_ris", 2.2)),
        path_loss_exponent_ris_user=float(pl.get("exponent_ris_user", 2.2)),
        reference_gain_db=float(pl.get("reference_gain_db", -30.0)),
        bs=tuple(_bs_from_dict(b) for b in data["bs"]),
    )


def scenario_config_to_dict(config: ScenarioConfig) -> dict:
    def user_dict(u: UserConfig) -> dict:
        d = {"position_m": list(u.position_m), "qos_threshold_db": u.qos_threshold_db}
        if u.azimuth_rad is not None:
            d["azimuth_deg"] = math.degrees(u.azimuth_rad)
        if u.elevation_rad:
            d["elevation_deg"] = math.degrees(u.elevation_rad)
        if u.noise_variance_w is not None:
            d["noise_variance_w"] = u.noise_variance_w
        return d

    def bs_dict(b: BsConfig) -> dict:
        d = {
            "num_antennas": b.num_antennas,
            "total_power_w": b.total_power_w,
            "rician_factor": b.rician_factor,
            "carrier_band_id": b.carrier_band_id,
            "position_m": list(b.position_m),
            "users": [user_dict(u) for u in b.users],
        }
        if b.user_rician_factor is not None:
            d["user_rician_factor"] = (
                "inf" if math.isinf(b.user_rician_factor) else b.user_rician_factor
            )
        if b.azimuth_rad is not None:
            d["azimuth_deg"] = math.degrees(b.azimuth_rad)
        if b.elevation_rad:
            d["elevation_deg"] = math.degrees(b.elevation_rad)
        return d

    return {
        "ris": {"elements": config.ris_elements, "position_m": list(config.ris_position_m)},
        "noise_variance_w": config.noise_variance_w,
        "path_loss": {
            "exponent_bs_ris": config.path_loss_exponent_bs_ris,
            "exponent_ris_user": config.path_loss_exponent_ris_user,
            "reference_gain_db": config.reference_gain_db,
        },
        "bs": [bs_dict(b) for b in config.bs],
    }


def ring_scenario(
    num_bs: int,
    num_antennas: int,
    num_users: int,
    ris_elements: int,
    *,
    total_power_w: float = 1.0,
    rician_factor: float = 1.0,
    user_rician_factor: float | None = math.inf,
    noise_variance_w: float = 1.0,
    qos_threshold_db: float = 5.0,
    bs_distance_m: float = 50.0,
    user_distance_m: float = 2.0,
    user_spread_deg: float = 40.0,
    unit_path_loss: bool = True,
    path_loss_exponent: float | None = None,
    reference_gain_db: float | None = None,
) -> Scenario:
    """Reference layout: BSs on a ring around the RIS, users close to it.

    BS s sits at ``bs_distance_m`` from the RIS at azimuth ``s * 360/S`` deg;
    its users sit ``user_distance_m`` away, fanned over ``user_spread_deg``
    degrees around the BS azimuth.  Fan centers are folded away from the
    RIS array's endfire directions (azimuths near +-90 deg), where a linear
    array cannot resolve users.  With ``unit_path_loss`` the large-scale
    gains are 1 (normalized distances); otherwise the configured path-loss
    law applies.
    """
    bs_list = []
    for s in range(num_bs):
        az = 2.0 * math.pi * s / num_bs
        pos = (bs_distance_m * math.cos(az), bs_distance_m * math.sin(az))
        center = _fold_from_endfire(az + math.pi / 7.0)
        users = []
        for k in range(num_users):
            if num_users == 1:
                off = 0.0
            else:
                off = math.radians(user_spread_deg) * (k / (num_users - 1) - 0.5)
            ua = center + off
            upos = (user_distance_m * math.cos(ua), user_distance_m * math.sin(ua))
            users.append(UserConfig(position_m=upos, qos_threshold_db=qos_threshold_db))
        bs_list.append(
            BsConfig(
                num_antennas=num_antennas,
                total_power_w=total_power_w,
                rician_factor=rician_factor,
                carrier_band_id=s,
                position_m=pos,
                users=tuple(users),
                user_rician_factor=user_rician_factor,
            )
        )
    exponent = path_loss_exponent
    if exponent is None:
        exponent = 0.0 if unit_path_loss else 2.2
    gain = reference_gain_db
    if gain is None:
        gain = 0.0 if unit_path_loss else -30.0
    config = ScenarioConfig(
        ris_elements=ris_elements,
        bs=tuple(bs_list),
        noise_variance_w=noise_variance_w,
        path_loss_exponent_bs_ris=exponent,
        path_loss_exponent_ris_user=exponent,
        reference_gain_db=gain,
    )
    return build_scenario(config)
