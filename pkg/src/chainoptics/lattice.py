"""
Chain construction: coupling patterns and on-site potential profiles.

Conventions used throughout the package:
  - energies in units of the bulk hopping J (J = 1), hbar = 1, lattice
    spacing 1, times in units 1/J;
  - sites are numbered 1..L in prose and docstrings, arrays are 0-based;
  - the single-particle Hamiltonian matrix is tridiagonal with
    off-diagonal -J_j/2 and diagonal -mu_j;
  - a global constant chemical potential is dropped entirely (it only
    contributes a global phase at fixed particle number).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CouplingScheme",
    "PotentialProfile",
    "ChainSpec",
    "build_chain",
    "to_config",
    "from_config",
]


# ---- scheme and profile descriptions ----

@dataclass(frozen=True)
class CouplingScheme:
    """
    Which bonds deviate from J = 1.

    variant is one of "uniform", "optimal" (J_1 = J_{L-1} = x),
    "double_optimal" (J_1 = J_{L-1} = x1, J_2 = J_{L-2} = x2) or
    "custom" (full list of L-1 couplings). Modified values must lie in (0, 1].
    """
    variant: str
    params: tuple[float, ...] = ()

    @classmethod
    def uniform(cls) -> "CouplingScheme":
        return cls("uniform")

    @classmethod
    def optimal(cls, x: float) -> "CouplingScheme":
        return cls("optimal", (float(x),))

    @classmethod
    def double_optimal(cls, x1: float, x2: float) -> "CouplingScheme":
        return cls("double_optimal", (float(x1), float(x2)))

    @classmethod
    def custom(cls, couplings) -> "CouplingScheme":
        return cls("custom", tuple(float(c) for c in couplings))


@dataclass(frozen=True)
class PotentialProfile:
    """
    One additive contribution to the on-site potentials mu_j (or, for
    "coupling_impurity", a multiplicative change of the middle bond).

    kinds and params:
      center_impurity   (beta,)          mu at the center site N+1, odd L only
      coupling_impurity (eta,)           middle bond J_N -> eta, even L only
      step              (gamma_r,)       mu_j = gamma_r on the right half j > N+1
      gaussian_impurity (beta, sigma)    mu_j = beta*exp(-(N+1-j)^2/sigma^2)
      walls             (beta_walls,)    embed in L+2 sites, repulsive end barriers
      harmonic          (omega,)         mu_j = -omega^2 (j - center)^2 / 2
    """
    kind: str
    params: tuple[float, ...] = ()

    @classmethod
    def center_impurity(cls, beta: float) -> "PotentialProfile":
        return cls("center_impurity", (float(beta),))

    @classmethod
    def coupling_impurity(cls, eta: float) -> "PotentialProfile":
        return cls("coupling_impurity", (float(eta),))

    @classmethod
    def step(cls, gamma_r: float) -> "PotentialProfile":
        return cls("step", (float(gamma_r),))

    @classmethod
    def gaussian_impurity(cls, beta: float, sigma: float) -> "PotentialProfile":
        return cls("gaussian_impurity", (float(beta), float(sigma)))

    @classmethod
    def gaussian_impurity_fwhm(cls, beta: float, fwhm: float) -> "PotentialProfile":
        # FWHM of exp(-x^2/sigma^2) is 2*sigma*sqrt(ln 2)
        return cls.gaussian_impurity(beta, fwhm / (2.0 * np.sqrt(np.log(2.0))))

    @classmethod
    def walls(cls, beta_walls: float) -> "PotentialProfile":
        return cls("walls", (float(beta_walls),))

    @classmethod
    def harmonic(cls, omega: float) -> "PotentialProfile":
        return cls("harmonic", (float(omega),))


_PROFILE_KINDS = {
    "center_impurity": 1,
    "coupling_impurity": 1,
    "step": 1,
    "gaussian_impurity": 2,
    "walls": 1,
    "harmonic": 1,
}


@dataclass(frozen=True)
class ChainSpec:
    """
    One lattice instance: couplings J_j (length L-1) and potentials mu_j
    (length L). end_sites marks the pair of sites that play the role of
    the chain ends; it differs from (1, L) only when a walls profile
    embedded the physical chain into a longer one.
    """
    L: int
    couplings: np.ndarray
    potentials: np.ndarray
    end_sites: tuple[int, int]
    scheme: CouplingScheme = field(default_factory=CouplingScheme.uniform)
    profiles: tuple[PotentialProfile, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.couplings, dtype=float)
        p = np.asarray(self.potentials, dtype=float)
        if c.shape != (self.L - 1,):
            raise ValueError("couplings must have exactly L-1 entries")
        if p.shape != (self.L,):
            raise ValueError("potentials must have exactly L entries")
        if not np.all(c > 0.0):
            raise ValueError("all couplings must be strictly positive")
        if not np.all(np.isfinite(p)):
            raise ValueError("all potentials must be finite")
        c.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "potentials", p)

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """(diagonal, off-diagonal) of H: diag -mu_j, off-diag -J_j/2."""
        return -self.potentials.copy(), -self.couplings / 2.0

    @property
    def embedded_length(self) -> int:
        """Number of sites between (and including) the flagged end sites."""
        a, b = self.end_sites
        return b - a + 1


# ---- construction ----

def _apply_scheme(couplings: np.ndarray, scheme: CouplingScheme,
                  first_bond: int, last_bond: int) -> None:
    """Modify couplings in place; bond j (1-based) joins sites j and j+1."""
    if scheme.variant == "uniform":
        return
    if scheme.variant == "optimal":
        (x,) = scheme.params
        _check_coupling_value(x)
        couplings[first_bond - 1] = x
        couplings[last_bond - 1] = x
    elif scheme.variant == "double_optimal":
        x1, x2 = scheme.params
        _check_coupling_value(x1)
        _check_coupling_value(x2)
        couplings[first_bond - 1] = x1
        couplings[last_bond - 1] = x1
        couplings[first_bond] = x2
        couplings[last_bond - 2] = x2
    elif scheme.variant == "custom":
        vals = np.asarray(scheme.params, dtype=float)
        if vals.shape != (last_bond - first_bond + 1,):
            raise ValueError("custom scheme needs exactly L-1 couplings")
        if not np.all(vals > 0.0):
            raise ValueError("custom couplings must be strictly positive")
        couplings[first_bond - 1:last_bond] = vals
    else:
        raise ValueError(f"unknown coupling scheme {scheme.variant!r}")


def _check_coupling_value(x: float) -> None:
    if not (0.0 < x <= 1.0):
        raise ValueError(f"scheme coupling {x} outside (0, 1]")


def build_chain(L: int, scheme: CouplingScheme,
                profiles: list[PotentialProfile] | tuple[PotentialProfile, ...] = ()) -> ChainSpec:
    """
    Assemble a ChainSpec of physical length L.

    Potential profiles add; a coupling impurity rescales the middle bond;
    a walls profile extends the lattice to L+2 sites with strong end
    potentials and flags the embedded ends. Profile order is irrelevant.
    """
    if L < 3:
        raise ValueError("L must be >= 3")
    profiles = tuple(profiles)
    for p in profiles:
        if p.kind not in _PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {p.kind!r}")
        if len(p.params) != _PROFILE_KINDS[p.kind]:
            raise ValueError(f"profile {p.kind} takes {_PROFILE_KINDS[p.kind]} parameter(s)")

    wall_profiles = [p for p in profiles if p.kind == "walls"]
    if len(wall_profiles) > 1:
        raise ValueError("at most one walls profile")

    if wall_profiles:
        total = L + 2
        offset = 1                  # embedded site s sits at array index offset + s - 1
        end_sites = (2, L + 1)
    else:
        total = L
        offset = 0
        end_sites = (1, L)

    couplings = np.ones(total - 1)
    # scheme acts on the boundary bonds of the physical chain
    _apply_scheme(couplings, scheme, first_bond=offset + 1, last_bond=offset + L - 1)

    potentials = np.zeros(total)
    if wall_profiles:
        # walls act as repulsive barriers: mu = -beta_walls puts +beta_walls
        # on the Hamiltonian diagonal at the two outer sites
        potentials[0] = -wall_profiles[0].params[0]
        potentials[-1] = -wall_profiles[0].params[0]

    sites = np.arange(1, L + 1)     # embedded 1-based coordinates
    view = slice(offset, offset + L)
    for p in profiles:
        if p.kind == "walls":
            continue
        if p.kind == "center_impurity":
            if L % 2 == 0:
                raise ValueError("center_impurity requires odd L")
            potentials[offset + (L + 1) // 2 - 1] += p.params[0]
        elif p.kind == "coupling_impurity":
            if L % 2 == 1:
                raise ValueError("coupling_impurity requires even L")
            eta = p.params[0]
            if not (0.0 < eta <= 1.0):
                raise ValueError("coupling impurity eta must be in (0, 1]")
            couplings[offset + L // 2 - 1] *= eta
        elif p.kind == "step":
            start = L // 2 + 2 if L % 2 == 1 else L // 2 + 1
            potentials[view][sites >= start] += p.params[0]
        elif p.kind == "gaussian_impurity":
            beta, sigma = p.params
            if sigma <= 0.0:
                raise ValueError("gaussian impurity sigma must be > 0")
            center = 0.5 * (L + 1)
            potentials[view] += beta * np.exp(-((center - sites) ** 2) / sigma ** 2)
        elif p.kind == "harmonic":
            omega = p.params[0]
            if omega < 0.0:
                raise ValueError("harmonic omega must be >= 0")
            center = 0.5 * (L + 1)
            potentials[view] += -0.5 * omega ** 2 * (sites - center) ** 2

    return ChainSpec(L=total, couplings=couplings, potentials=potentials,
                     end_sites=end_sites, scheme=scheme, profiles=profiles)


# ---- flat key-value serialization of the build recipe ----

def to_config(spec: ChainSpec) -> str:
    """
    Serialize the build recipe (not the raw arrays) to a flat key = value
    text block with deterministic field ordering.
    """
    phys_L = spec.L - 2 if any(p.kind == "walls" for p in spec.profiles) else spec.L
    lines = [
        f"length = {phys_L}",
        f"scheme = {spec.scheme.variant}",
        "scheme_params = " + ",".join(repr(v) for v in spec.scheme.params),
    ]
    for i, p in enumerate(spec.profiles):
        lines.append(f"profiles[{i}].kind = {p.kind}")
        lines.append(f"profiles[{i}].params = " + ",".join(repr(v) for v in p.params))
    return "\n".join(lines) + "\n"


def from_config(text: str) -> ChainSpec:
    """Rebuild a ChainSpec from to_config output. Unknown keys are rejected."""
    length = None
    scheme_variant = None
    scheme_params: tuple[float, ...] = ()
    prof_kind: dict[int, str] = {}
    prof_params: dict[int, tuple[float, ...]] = {}

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "length":
            length = int(val)
        elif key == "scheme":
            scheme_variant = val
        elif key == "scheme_params":
            scheme_params = tuple(float(v) for v in val.split(",")) if val else ()
        elif key.startswith("profiles[") and key.endswith("].kind"):
            prof_kind[int(key[len("profiles["):key.index("]")])] = val
        elif key.startswith("profiles[") and key.endswith("].params"):
            idx = int(key[len("profiles["):key.index("]")])
            prof_params[idx] = tuple(float(v) for v in val.split(",")) if val else ()
        else:
            raise ValueError(f"unknown config key: {key!r}")

    if length is None or scheme_variant is None:
        raise ValueError("config must define length and scheme")
    if sorted(prof_kind) != list(range(len(prof_kind))):
        raise ValueError("profile indices must be contiguous from 0")
    profiles = [PotentialProfile(prof_kind[i], prof_params.get(i, ()))
                for i in range(len(prof_kind))]
    return build_chain(length, CouplingScheme(scheme_variant, scheme_params), profiles)
