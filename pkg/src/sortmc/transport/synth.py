"""Synthetic multi-group libraries bundled with the package.

Values are invented but shaped like real data: 1/v capture and fission at low
energy, slowing down governed by nuclide mass, a fast fission spectrum. They
exist so that transport and sorting can be exercised without evaluated
nuclear data. Regenerate the bundled files with ``python -m
sortmc.transport.synth <data dir>``.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

from sortmc._io import atomic_write_text
from sortmc.transport.materials import MicroLibrary, MicroXS, format_library

NUCLIDES = ["B-10", "B-11", "C-12", "C-13", "O-16", "Si-28", "Si-29", "Si-30",
            "U-235", "U-238"]

# name: (mass, potential scatter b, capture at 0.0253 eV b, fission at 0.0253 eV b,
#        fast fission b above 1 MeV, nu thermal)
_PARAMS = {
    "B-10": (10.0, 2.2, 3840.0, 0.0, 0.0, 0.0),
    "B-11": (11.0, 4.8, 0.0055, 0.0, 0.0, 0.0),
    "C-12": (12.0, 4.75, 0.0035, 0.0, 0.0, 0.0),
    "C-13": (13.0, 4.2, 0.0014, 0.0, 0.0, 0.0),
    "O-16": (16.0, 3.9, 0.00019, 0.0, 0.0, 0.0),
    "Si-28": (28.0, 2.0, 0.177, 0.0, 0.0, 0.0),
    "Si-29": (29.0, 2.6, 0.101, 0.0, 0.0, 0.0),
    "Si-30": (30.0, 2.5, 0.107, 0.0, 0.0, 0.0),
    "U-235": (235.0, 11.5, 99.0, 585.0, 1.2, 2.43),
    "U-238": (238.0, 9.3, 2.68, 0.0, 0.45, 2.6),
}

E_MAX = 2.0e7
E_MIN = 1.0e-3
THERMAL_E = 0.0253


def group_bounds(groups: int) -> np.ndarray:
    """Descending energy boundaries in eV, equal lethargy width."""
    return np.geomspace(E_MAX, E_MIN, groups + 1)


def _fission_spectrum(mid: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    # Maxwellian approximation with T = 1.33 MeV, integrated over each group.
    t = 1.33e6
    cdf = lambda e: 1.0 - math.exp(-e / t) * (1.0 + e / t)  # noqa: E731
    chi = np.array([cdf(bounds[g]) - cdf(bounds[g + 1]) for g in range(len(mid))])
    chi = np.clip(chi, 0.0, None)
    return chi / chi.sum()


def synthetic_library(groups: int = 23) -> MicroLibrary:
    bounds = group_bounds(groups)
    mid = np.sqrt(bounds[:-1] * bounds[1:])
    du = math.log(bounds[0] / bounds[1])
    chi = _fission_spectrum(mid, bounds)
    # Crude thermal equilibrium: groups below 0.5 eV exchange energy upward.
    thermal = mid < 0.5
    lib = MicroLibrary(groups)
    for name in NUCLIDES:
        mass, pot, cap0, fis0, fast_fis, nu0 = _PARAMS[name]
        one_over_v = np.sqrt(THERMAL_E / mid)
        capture = cap0 * one_over_v
        fission = fis0 * one_over_v
        if fast_fis:
            fission = fission + fast_fis / (1.0 + np.exp(-(mid - 1.5e6) / 3.0e5))
        alpha = ((mass - 1.0) / (mass + 1.0)) ** 2
        xi = 1.0 + alpha * math.log(alpha) / (1.0 - alpha)
        down = min(0.95, xi / du)
        scatter = np.zeros((groups, groups))
        for g in range(groups):
            s = pot
            if g == groups - 1:
                scatter[g, g - 1] = 0.25 * s
                scatter[g, g] = 0.75 * s
            elif thermal[g]:
                scatter[g, g - 1] = 0.10 * s
                scatter[g, g + 1] = down * s * 0.5
                scatter[g, g] = s - scatter[g, g - 1] - scatter[g, g + 1]
            else:
                # Light nuclides can jump two groups at high energy.
                far = 0.1 * down if mass < 20 and g + 2 < groups else 0.0
                scatter[g, g + 1] = (down - far) * s
                if far:
                    scatter[g, g + 2] = far * s
                scatter[g, g] = s - scatter[g].sum()
        nu = nu0 + 0.13 * mid / 1.0e6 if nu0 else np.zeros(groups)
        total = scatter.sum(axis=1) + capture + fission
        lib.nuclides[name] = MicroXS(total, scatter, fission, np.asarray(nu, float), chi.copy())
    lib.validate()
    return lib


def test_library_2g() -> MicroLibrary:
    """Hand-set two-group data (fast, thermal)."""
    table = {
        # name: fast (s00, s01, fission, capture), thermal (s10, s11, fission, capture), nu
        "B-10": ((2.0, 0.05, 0.0, 0.45), (0.0, 3.0, 0.0, 3839.0), (0.0, 0.0)),
        "B-11": ((2.8, 0.2, 0.0, 0.0), (0.0, 4.995, 0.0, 0.005), (0.0, 0.0)),
        "C-12": ((4.25, 0.35, 0.0, 0.0), (0.0, 4.8965, 0.0, 0.0035), (0.0, 0.0)),
        "C-13": ((3.9, 0.3, 0.0, 0.0), (0.0, 4.1986, 0.0, 0.0014), (0.0, 0.0)),
        "O-16": ((3.7, 0.08, 0.0, 0.02), (0.0, 3.8998, 0.0, 0.0002), (0.0, 0.0)),
        "Si-28": ((2.45, 0.03, 0.0, 0.02), (0.0, 2.03, 0.0, 0.17), (0.0, 0.0)),
        "Si-29": ((2.45, 0.03, 0.0, 0.02), (0.0, 2.5, 0.0, 0.1), (0.0, 0.0)),
        "Si-30": ((2.45, 0.03, 0.0, 0.02), (0.0, 2.4, 0.0, 0.1), (0.0, 0.0)),
        "U-235": ((4.5, 0.01, 1.3, 1.19), (0.0, 15.0, 585.0, 100.0), (2.5, 2.43)),
        "U-238": ((7.0, 0.03, 0.1, 0.87), (0.0, 9.3, 0.0, 2.7), (2.8, 0.0)),
    }
    chi = np.array([0.97, 0.03])
    lib = MicroLibrary(2)
    for name, (fast, therm, nu) in table.items():
        scatter = np.array([[fast[0], fast[1]], [therm[0], therm[1]]])
        fission = np.array([fast[2], therm[2]])
        capture = np.array([fast[3], therm[3]])
        total = scatter.sum(axis=1) + fission + capture
        lib.nuclides[name] = MicroXS(total, scatter, fission, np.array(nu), chi.copy())
    lib.validate()
    return lib


def test_library_1g() -> MicroLibrary:
    """Hand-set one-group data."""
    table = {
        # name: (scatter, fission, capture, nu)
        "B-10": (2.0, 0.0, 600.0, 0.0),
        "B-11": (4.5, 0.0, 0.003, 0.0),
        "C-12": (4.7, 0.0, 0.002, 0.0),
        "C-13": (4.2, 0.0, 0.001, 0.0),
        "O-16": (3.8, 0.0, 0.0005, 0.0),
        "Si-28": (2.2, 0.0, 0.1, 0.0),
        "Si-29": (2.5, 0.0, 0.08, 0.0),
        "Si-30": (2.4, 0.0, 0.08, 0.0),
        "U-235": (12.0, 45.0, 12.0, 2.43),
        "U-238": (9.0, 0.08, 1.2, 2.8),
    }
    lib = MicroLibrary(1)
    for name, (s, f, c, nu) in table.items():
        lib.nuclides[name] = MicroXS(np.array([s + f + c]), np.array([[s]]), np.array([f]),
                                     np.array([nu]), np.array([1.0]))
    lib.validate()
    return lib


BUNDLED = {
    "synthetic_23g.lib": (synthetic_library, "Synthetic 23-group library, equal-lethargy groups"),
    "test_2g.lib": (test_library_2g, "Two-group test library (group 0 fast, group 1 thermal)"),
    "test_1g.lib": (test_library_1g, "One-group test library"),
}


def render_bundled(name: str) -> str:
    build, header = BUNDLED[name]
    return format_library(build(), header + "\nGenerated by sortmc.transport.synth; do not edit.")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else Path(__file__).parent / "data"
    for name in BUNDLED:
        atomic_write_text(out / name, render_bundled(name))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
