"""Material compositions, multi-group microscopic libraries, macroscopic data.

Material file format (UTF-8, line oriented, ``#`` starts a comment)::

    material Fuel kernel
    U-235   3.99198E-3
    U-238   1.92441E-2

Micro library format: a stream of whitespace separated tokens, ``#``
comments allowed anywhere, line breaks carry no meaning::

    groups <G>
    nuclide <name>
      total   <G values>          # barns
      scatter <G*G values>        # row g holds g -> g' (barns)
      fission <G values>
      nu      <G values>
      chi     <G values>          # sums to 1
    end

Group 0 is the fastest group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.linalg

_ELEMENTS = set("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn
Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La
Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po
At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg
Cn Nh Fl Mc Lv Ts Og
""".split())
_NUCLIDE_RE = re.compile(r"^([A-Z][a-z]?)-(\d{1,3})(m\d?)?$")

CHI_TOLERANCE = 1e-12


class MaterialFormatError(ValueError):
    pass


def is_known_nuclide(name: str) -> bool:
    m = _NUCLIDE_RE.match(name)
    return bool(m) and m.group(1) in _ELEMENTS


@dataclass(frozen=True)
class NuclideDensity:
    nuclide: str
    density: float
    text: str = ""  # density exactly as written in the source file

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError(f"{self.nuclide}: density must be positive, got {self.density}")


def data_path(name: str) -> Path:
    """Path of a bundled data file (``htr10_materials.txt``, ``test_2g.lib``, ...)."""
    return Path(str(resources.files("sortmc.transport") / "data" / name))


def load_materials(path) -> list[tuple[str, list[NuclideDensity]]]:
    path = Path(path)
    materials: list[tuple[str, list[NuclideDensity]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("material ") or line == "material":
                name = line[len("material"):].strip()
                if not name:
                    raise MaterialFormatError(f"{path}:{lineno}: material needs a name")
                materials.append((name, []))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MaterialFormatError(
                    f"{path}:{lineno}: expected '<nuclide> <density>', got {line!r}")
            nuclide, text = parts
            if not materials:
                raise MaterialFormatError(f"{path}:{lineno}: nuclide before any material header")
            if not is_known_nuclide(nuclide):
                raise MaterialFormatError(f"{path}:{lineno}: unknown nuclide {nuclide!r}")
            try:
                density = float(text)
            except ValueError:
                raise MaterialFormatError(
                    f"{path}:{lineno}: bad density {text!r}") from None
            if not density > 0:
                raise MaterialFormatError(
                    f"{path}:{lineno}: density of {nuclide} must be positive, got {text}")
            materials[-1][1].append(NuclideDensity(nuclide, density, text))
    return materials


@dataclass
class MicroXS:
    total: np.ndarray
    scatter: np.ndarray
    fission: np.ndarray
    nu: np.ndarray
    chi: np.ndarray

    @property
    def capture(self) -> np.ndarray:
        return self.total - self.scatter.sum(axis=1) - self.fission


@dataclass
class MicroLibrary:
    groups: int
    nuclides: dict[str, MicroXS] = field(default_factory=dict)

    def validate(self) -> None:
        g = self.groups
        for name, xs in self.nuclides.items():
            shapes = [xs.total.shape, xs.fission.shape, xs.nu.shape, xs.chi.shape]
            if any(s != (g,) for s in shapes) or xs.scatter.shape != (g, g):
                raise ValueError(f"{name}: arrays do not match {g} groups")
            for label, arr in (("total", xs.total), ("scatter", xs.scatter),
                               ("fission", xs.fission), ("nu", xs.nu), ("chi", xs.chi)):
                if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                    raise ValueError(f"{name}: {label} has negative or non-finite entries")
            if np.any(xs.capture < -1e-12 * np.maximum(xs.total, 1.0)):
                raise ValueError(f"{name}: total is below scatter + fission")
            if abs(xs.chi.sum() - 1.0) > CHI_TOLERANCE:
                raise ValueError(f"{name}: chi sums to {xs.chi.sum()!r}, not 1")


_LIB_KEYS = {"total": 1, "scatter": 2, "fission": 1, "nu": 1, "chi": 1}


def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        for tok in line.split("#", 1)[0].split():
            yield lineno, tok


def parse_library(text: str, source: str = "<string>") -> MicroLibrary:
    toks = list(_tokens(text))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(toks):
            raise MaterialFormatError(f"{source}: unexpected end of file, expected {what}")
        pos += 1
        return toks[pos - 1]

    def numbers(count, what):
        vals = []
        for _ in range(count):
            lineno, tok = take(what)
            try:
                vals.append(float(tok))
            except ValueError:
                raise MaterialFormatError(
                    f"{source}:{lineno}: expected a number for {what}, got {tok!r}") from None
        return np.array(vals)

    lineno, tok = take("'groups'")
    if tok != "groups":
        raise MaterialFormatError(f"{source}:{lineno}: file must start with 'groups'")
    lineno, tok = take("group count")
    try:
        groups = int(tok)
    except ValueError:
        raise MaterialFormatError(f"{source}:{lineno}: bad group count {tok!r}") from None
    if groups < 1:
        raise MaterialFormatError(f"{source}:{lineno}: group count must be >= 1")
    lib = MicroLibrary(groups)
    while pos < len(toks):
        lineno, tok = take("'nuclide'")
        if tok != "nuclide":
            raise MaterialFormatError(f"{source}:{lineno}: expected 'nuclide', got {tok!r}")
        lineno, name = take("nuclide name")
        if not is_known_nuclide(name):
            raise MaterialFormatError(f"{source}:{lineno}: unknown nuclide {name!r}")
        fields: dict[str, np.ndarray] = {}
        while True:
            lineno, key = take("a cross-section keyword or 'end'")
            if key == "end":
                break
            if key not in _LIB_KEYS:
                raise MaterialFormatError(f"{source}:{lineno}: unknown keyword {key!r}")
            fields[key] = numbers(groups ** _LIB_KEYS[key], f"{name} {key}")
        missing = set(_LIB_KEYS) - set(fields)
        if missing:
            raise MaterialFormatError(f"{source}: {name} lacks {sorted(missing)}")
        lib.nuclides[name] = MicroXS(
            total=fields["total"], scatter=fields["scatter"].reshape(groups, groups),
            fission=fields["fission"], nu=fields["nu"], chi=fields["chi"])
    try:
        lib.validate()
    except ValueError as exc:
        raise MaterialFormatError(f"{source}: {exc}") from None
    return lib


def load_library(path) -> MicroLibrary:
    path = Path(path)
    return parse_library(path.read_text(encoding="utf-8"), str(path))


def format_library(lib: MicroLibrary, header: str = "") -> str:
    def row(values):
        return " ".join(repr(float(v)) for v in values)

    lines = [f"# {line}" for line in header.splitlines()]
    lines.append(f"groups {lib.groups}")
    for name, xs in lib.nuclides.items():
        lines.append(f"nuclide {name}")
        lines.append(f"  total   {row(xs.total)}")
        lines.append("  scatter")
        lines.extend(f"    {row(r)}" for r in xs.scatter)
        lines.append(f"  fission {row(xs.fission)}")
        lines.append(f"  nu      {row(xs.nu)}")
        lines.append(f"  chi     {row(xs.chi)}")
        lines.append("end")
    return "\n".join(lines) + "\n"


@dataclass
class MaterialMG:
    """Macroscopic multi-group data in cm^-1."""

    total: np.ndarray
    scatter: np.ndarray
    fission: np.ndarray
    nu_fission: np.ndarray
    chi: np.ndarray
    name: str = ""

    @property
    def groups(self) -> int:
        return self.total.shape[0]

    @property
    def absorption(self) -> np.ndarray:
        return self.total - self.scatter.sum(axis=1)

    @classmethod
    def from_arrays(cls, total, scatter, nu_fission, fission=None, chi=None, name=""):
        total = np.atleast_1d(np.asarray(total, dtype=float))
        g = total.shape[0]
        scatter = np.asarray(scatter, dtype=float).reshape(g, g)
        nu_fission = np.atleast_1d(np.asarray(nu_fission, dtype=float))
        if fission is None:
            # A nominal nu of 2.5 only matters for bank site counts.
            fission = nu_fission / 2.5
        fission = np.atleast_1d(np.asarray(fission, dtype=float))
        if chi is None:
            chi = np.zeros(g)
            chi[0] = 1.0
        mat = cls(total, scatter, fission, nu_fission, np.asarray(chi, dtype=float), name)
        mat.validate()
        return mat

    def validate(self) -> None:
        for label in ("total", "scatter", "fission", "nu_fission", "chi"):
            arr = getattr(self, label)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{self.name or 'material'}: {label} has invalid entries")
        slack = self.total - self.scatter.sum(axis=1) - self.fission
        if np.any(slack < -1e-12 * np.maximum(self.total, 1.0)):
            raise ValueError(f"{self.name or 'material'}: total below scatter + fission")
        if np.any((self.nu_fission > 0) & (self.fission <= 0)):
            raise ValueError(f"{self.name or 'material'}: nu_fission without fission")


def macro_xs_build(densities: list[NuclideDensity], lib: MicroLibrary,
                   name: str = "") -> MaterialMG:
    """Sum of density times microscopic data over nuclides.

    Densities in 1e24 atoms/cm^3 times barns give cm^-1. The material fission
    spectrum is the production-weighted mix of nuclide spectra (zero when
    nothing fissions).
    """
    g = lib.groups
    total = np.zeros(g)
    scatter = np.zeros((g, g))
    fission = np.zeros(g)
    nu_fission = np.zeros(g)
    chi_acc = np.zeros(g)
    for nd in densities:
        try:
            xs = lib.nuclides[nd.nuclide]
        except KeyError:
            raise KeyError(f"nuclide {nd.nuclide!r} is missing from the library") from None
        total += nd.density * xs.total
        scatter += nd.density * xs.scatter
        fission += nd.density * xs.fission
        production = nd.density * xs.nu * xs.fission
        nu_fission += production
        chi_acc += production.sum() * xs.chi
    chi = chi_acc / chi_acc.sum() if chi_acc.sum() > 0 else np.zeros(g)
    return MaterialMG(total, scatter, fission, nu_fission, chi, name)


def build_materials(path, lib: MicroLibrary) -> dict[str, MaterialMG]:
    return {name: macro_xs_build(dens, lib, name) for name, dens in load_materials(path)}


def analytic_kinf_oracle(mat: MaterialMG) -> float:
    """Fundamental k of the infinite homogeneous medium.

    Balance: (diag(total) - scatter^T) phi = chi (nu_fission . phi) / k, so k is
    the dominant eigenvalue of A^-1 F with F = chi nu_fission^T.
    """
    if not np.any(mat.nu_fission > 0):
        return 0.0
    a = np.diag(mat.total) - mat.scatter.T
    f = np.outer(mat.chi, mat.nu_fission)
    eig = scipy.linalg.eigvals(np.linalg.solve(a, f))
    return float(np.max(eig.real))


def infinite_medium_flux(mat: MaterialMG) -> np.ndarray:
    """Group flux per unit source emitted with the material spectrum."""
    a = np.diag(mat.total) - mat.scatter.T
    return np.linalg.solve(a, mat.chi)
