"""Parameter profiles, statistical thresholds and the standing deviation notes
stamped into every report."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

CHI2_ALPHA = 0.001
KS_ALPHA = 0.01
QUALITY_FACTOR = 1.5  # s >= gs_norm * 1.5 * sqrt(ln n)
TAIL_CUT = 12
PROBE_TAGS = 4  # tags measured at key generation to set V_eff
TAG_CACHE_SIZE = 64

PROFILE_ENV = "LHSIG_PROFILE"

# name -> keyword arguments of scheme.setup
PROFILES = {
    "toy16": {"n": 16, "k": 4, "p": 3, "q": 97, "h": 2, "profile": "toy"},
    "toy16-257": {"n": 16, "k": 4, "p": 3, "q": 257, "h": 2, "profile": "toy"},
    "toy64": {"n": 64, "k": 4, "p": 3, "q": 257, "h": 2, "profile": "toy"},
    "paper4096": {"n": 4096, "k": 2, "p": 3, "profile": "paper"},
}

DEFAULT_PROFILE = "toy16"

DEVIATIONS = {
    "toy": [
        "toy profile: q, h chosen by hand; q >= (nkp)^2 and h = floor(n / (6 log2 q)) not enforced",
        "V_eff replaces V: max(V, 1.5 sqrt(ln n) * gs_norm(p T_B)) measured over probe tags",
    ],
    "paper": [
        "log taken base 2 in q, h and V formulas",
    ],
    "common": [
        "extraction witness reduced mod q into centered residues before subtracting x'",
    ],
    "hadamard": [
        "tag bases delegate from the integer product H_n D T_A instead of the centered lift of H T_A mod q",
    ],
    "centered": [
        "tag bases use the centered lift of H T_A mod q; H is orthogonal only mod q so T_B is not short",
    ],
}


def deviation_lines(profile: str, lift: str = "hadamard") -> list[str]:
    return list(DEVIATIONS.get(profile, [])) + DEVIATIONS[lift] + DEVIATIONS["common"]


@dataclass
class ProfileConfig:
    """A named profile plus run settings, loadable from JSON."""

    name: str = DEFAULT_PROFILE
    params: dict = field(default_factory=lambda: dict(PROFILES[DEFAULT_PROFILE]))
    seed: str = "00"
    out_dir: str = "."
    chi2_alpha: float = CHI2_ALPHA
    ks_alpha: float = KS_ALPHA

    @classmethod
    def named(cls, name: str) -> "ProfileConfig":
        if name not in PROFILES:
            raise KeyError(f"unknown profile {name!r}; known: {', '.join(sorted(PROFILES))}")
        return cls(name=name, params=dict(PROFILES[name]))

    @classmethod
    def load(cls, path: str) -> "ProfileConfig":
        with open(path) as fh:
            data = json.load(fh)
        base = cls.named(data.get("name", DEFAULT_PROFILE)) if data.get("name", DEFAULT_PROFILE) in PROFILES else cls()
        base.name = data.get("name", base.name)
        base.params.update(data.get("params", {}))
        for key in ("seed", "out_dir", "chi2_alpha", "ks_alpha"):
            if key in data:
                setattr(base, key, data[key])
        return base

    @classmethod
    def from_env(cls) -> "ProfileConfig":
        path = os.environ.get(PROFILE_ENV)
        return cls.load(path) if path else cls()

    def to_dict(self) -> dict:
        return asdict(self)
