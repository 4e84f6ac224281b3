"""Influence sets of diffusion stacks, measured with gradient probes.

The influence set of output site a at layer t is the support of the gradient
of sum_channels(depth hidden of layer t at a) with respect to the features
entering the diffusion stack.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .network import NetworkConfig, NetworkParams, diffusion_stack_backward, diffusion_stack_forward
from .ring_kernels import chebyshev_ball

INFLUENCE_THRESHOLD = 1e-12
SCHEMES = ("pdn", "lg_lstm_8", "diagonal_bilstm")

SCHEME_NOTES = {
    "lg_lstm_8": "8 adjacent neighbors per step; measured as a PDN with E=1",
    "diagonal_bilstm": "causal/anisotropic: reach grows one site per step towards one half-plane only",
}


def theoretical_radius(scheme: str, t: int, E: int | None = None) -> int:
    """Chebyshev reach after t layers. `scheme` is 'pdn' (needs E), 'pdn(E=2)', 'lg_lstm_8'
    or 'diagonal_bilstm'."""
    if t < 1:
        raise ConfigError(f"layer index must be >= 1, got {t}")
    name, E = parse_scheme(scheme, E)
    if name == "pdn":
        return t * E
    return t


def parse_scheme(scheme: str, E: int | None = None):
    if scheme.startswith("pdn(E=") and scheme.endswith(")"):
        return "pdn", int(scheme[6:-1])
    if scheme == "pdn":
        if E is None:
            raise ConfigError("scheme 'pdn' needs E")
        return "pdn", E
    if scheme in ("lg_lstm_8", "diagonal_bilstm"):
        return scheme, 1
    raise ConfigError(f"unknown diffusion scheme {scheme!r}")


def scheme_name(config: NetworkConfig) -> str:
    return f"pdn(E={config.rings})"


@dataclass
class InfluenceReport:
    scheme: str
    t: int
    site: tuple
    measured: set
    theoretical_radius: int
    match: bool
    param_count: int = 0

    @property
    def measured_radius(self) -> int:
        r0, c0 = self.site
        return max((max(abs(r - r0), abs(c - c0)) for r, c in self.measured), default=0)

    @property
    def measured_count(self) -> int:
        return len(self.measured)

    def format(self) -> str:
        return (f"scheme={self.scheme} t={self.t} site={self.site[0]},{self.site[1]} "
                f"measured_radius={self.measured_radius} theoretical_radius={self.theoretical_radius} "
                f"measured_count={self.measured_count} match={'true' if self.match else 'false'}")


def probe_features(config: NetworkConfig, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0, (config.image_rows, config.image_cols, config.channels))


def influence_set(config: NetworkConfig, params: NetworkParams, site, layer_index: int,
                  features=None) -> set:
    """Stack-input sites whose gradient magnitude exceeds the threshold."""
    r, c = site
    if not (0 <= r < config.image_rows and 0 <= c < config.image_cols):
        raise ConfigError(f"site {site} is outside the {config.image_rows}x{config.image_cols} grid")
    if not 1 <= layer_index <= len(params.layers):
        raise ConfigError(f"layer index {layer_index} outside 1..{len(params.layers)}")
    if features is None:
        features = probe_features(config)
    layers = params.layers[:layer_index]
    states, ctxs = diffusion_stack_forward(features, layers, config.variant)
    grads = [None] * layer_index
    probe = np.zeros(states[-1].shape)
    probe[r, c, :] = 1.0
    grads[-1] = probe
    g, _ = diffusion_stack_backward(ctxs, states, grads)
    mag = np.abs(g).max(axis=2)
    return {(int(i), int(j)) for i, j in np.argwhere(mag > INFLUENCE_THRESHOLD)}


def influence_report(config: NetworkConfig, params: NetworkParams, site, t: int,
                     scheme: str | None = None) -> InfluenceReport:
    scheme = scheme or scheme_name(config)
    measured = influence_set(config, params, site, t)
    radius = theoretical_radius("pdn", t, config.rings)
    ball = chebyshev_ball(tuple(site), radius, (config.image_rows, config.image_cols))
    return InfluenceReport(scheme, t, tuple(site), measured, radius, measured == ball, params.count())


def compare_schemes(entries, t_max: int, site=None) -> list:
    """Probe each (scheme label, config, params) for t = 1..t_max.

    `site` defaults to the grid center of each config.
    """
    reports = []
    for scheme, config, params in entries:
        if len(params.layers) < t_max:
            raise ConfigError(f"{scheme}: needs at least {t_max} layers, has {len(params.layers)}")
        s = site if site is not None else (config.image_rows // 2, config.image_cols // 2)
        for t in range(1, t_max + 1):
            reports.append(influence_report(config, params, s, t, scheme))
    return reports


def layers_to_reach(reports, scheme: str, radius: int):
    """Smallest t whose measured radius reaches `radius` (None if never)."""
    ts = [r.t for r in reports if r.scheme == scheme and r.measured_radius >= radius]
    return min(ts) if ts else None


def write_report(reports, path) -> None:
    Path(path).write_text("".join(r.format() + "\n" for r in reports), encoding="utf-8")


def parse_report_line(line: str) -> dict:
    fields = dict(tok.split("=", 1) for tok in line.split())
    for key in ("t", "measured_radius", "theoretical_radius", "measured_count"):
        fields[key] = int(fields[key])
    fields["site"] = tuple(int(v) for v in fields["site"].split(","))
    fields["match"] = fields["match"] == "true"
    return fields
