"""Ellipticity verdicts for decomposition spaces built from an initial package.

The deciding inequality is omega > m^(2/3), checked exactly as omega^3 > m^2
over the rationals. Every finite float is a rational, so the comparison never
depends on rounding.
"""

import json
from dataclasses import dataclass
from fractions import Fraction

from .circulation import DEFAULT_REGISTRY
from .errors import MissingOmega

QR_NON_ELLIPTIC = "QRNonElliptic"
OMITS_LIMIT_SET = "OmitsLimitSet"
NO_BLD_FROM_R3 = "NoBLDFromR3"
INCONCLUSIVE = "Inconclusive"
KINDS = (QR_NON_ELLIPTIC, OMITS_LIMIT_SET, NO_BLD_FROM_R3, INCONCLUSIVE)

OMISSION_THEOREM = (
    "Omitted limit set theorem: if each child is contractible in the parent and the circulation "
    "has order omega > m^(2/3), every quasiregular map from R^3 to the decomposition space "
    "with the Semmes metric misses the image of the limit set"
)
PICARD_ENDS = (
    "Picard theorem for quasiregular maps: a manifold receiving a non-constant quasiregular map "
    "from R^3 has boundedly many ends, while the complement of a Cantor set has infinitely many"
)
CANTOR_LIMIT = "For m >= 2 the limit set of the defining sequence is a Cantor set"
BLD_ARGUMENT = (
    "BLD argument: the decomposition space is compact and quasiconvex in the Semmes metric, "
    "so a BLD map from R^3 would be onto; combined with the omitted limit set this is impossible"
)
SINGLE_POINT = (
    "For m = 1 the limit set is a single point, so the ends argument does not apply "
    "and quasiregular ellipticity is left undecided"
)
CIRCULATION_SOURCE = "Circulation order omega as supplied by the {source}"


def _exact(omega):
    if isinstance(omega, str):
        return Fraction(omega.strip())
    if isinstance(omega, float):
        return Fraction(omega)  # exact binary value of the float
    return Fraction(omega)


@dataclass(frozen=True)
class ClassifierInput:
    m: int
    omega: object
    contractible_children: bool = True
    lam: float = 0.4
    package_id: str = "custom"
    omega_source: str = "user"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.omega is not None and _exact(self.omega) <= 0:
            raise ValueError("omega must be positive")

    @property
    def omega_exact(self):
        return None if self.omega is None else _exact(self.omega)


@dataclass(frozen=True)
class Step:
    claim: str
    citation: str

    def to_dict(self):
        return {"claim": self.claim, "citation": self.citation}


@dataclass(frozen=True)
class Verdict:
    package_id: str
    kinds: tuple
    rationale: tuple
    numeric_margin: float
    m: int
    omega: str

    @property
    def conclusive(self):
        return INCONCLUSIVE not in self.kinds

    def to_dict(self):
        return {
            "package_id": self.package_id,
            "kinds": list(self.kinds),
            "numeric_margin": self.numeric_margin,
            "m": self.m,
            "omega": self.omega,
            "rationale": [s.to_dict() for s in self.rationale],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["package_id"],
            tuple(data["kinds"]),
            tuple(Step(s["claim"], s["citation"]) for s in data["rationale"]),
            float(data["numeric_margin"]),
            int(data["m"]),
            str(data["omega"]),
        )


def classify(inp):
    """Verdict kinds with their rationale chain; Inconclusive names the failed hypothesis."""
    if inp.omega is None:
        raise MissingOmega(f"no circulation order known for {inp.package_id}; supply one")
    omega, m = inp.omega_exact, int(inp.m)
    margin = float(omega) - m ** (2 / 3)
    steps = [Step(f"omega = {omega} (m = {m})", CIRCULATION_SOURCE.format(source=inp.omega_source))]
    exceeds = omega**3 > m**2
    if exceeds:
        steps.append(Step(f"omega^3 = {omega**3} > m^2 = {m**2}, so omega > m^(2/3)", OMISSION_THEOREM))
    else:
        steps.append(Step(f"failed: omega^3 = {omega**3} <= m^2 = {m**2}, so omega <= m^(2/3)", OMISSION_THEOREM))
    if not inp.contractible_children:
        steps.append(Step("failed: some child handlebody is not contractible in the parent", OMISSION_THEOREM))
    if not (exceeds and inp.contractible_children):
        return Verdict(inp.package_id, (INCONCLUSIVE,), tuple(steps), margin, m, str(omega))

    kinds = [OMITS_LIMIT_SET]
    steps.append(Step("every non-constant quasiregular map from R^3 omits the limit set", OMISSION_THEOREM))
    if m >= 2:
        kinds.insert(0, QR_NON_ELLIPTIC)
        steps.append(Step("the limit set is a Cantor set", CANTOR_LIMIT))
        steps.append(Step("the complement of the limit set has infinitely many ends, so the space is not quasiregularly elliptic", PICARD_ENDS))
    else:
        steps.append(Step("quasiregular ellipticity is not decided", SINGLE_POINT))
    kinds.append(NO_BLD_FROM_R3)
    steps.append(Step("there is no BLD map from R^3 onto the space", BLD_ARGUMENT))
    return Verdict(inp.package_id, tuple(kinds), tuple(steps), margin, m, str(omega))


def classify_package(pkg, lam=0.4, omega=None, registry=DEFAULT_REGISTRY):
    """Classify a package, taking omega from the argument or else from the registry."""
    source = "user"
    if omega is None:
        bound = registry.lookup(pkg.package_id)
        if bound is None:
            raise MissingOmega(f"{pkg.package_id} has no registry entry; pass an omega")
        omega, source = bound.omega, f"registry ({bound.provenance})"
    inp = ClassifierInput(pkg.m, omega, pkg.contractible_children, lam, pkg.package_id, source)
    return classify(inp)


def report(verdict, fmt="json"):
    if fmt == "json":
        return json.dumps(verdict.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        f"package: {verdict.package_id}",
        f"verdict: {', '.join(verdict.kinds)}",
        f"margin omega - m^(2/3): {verdict.numeric_margin:.6f}",
        "rationale:",
    ]
    lines += [f"  {i}. {s.claim}\n     [{s.citation}]" for i, s in enumerate(verdict.rationale, start=1)]
    return "\n".join(lines) + "\n"


def parse_report(text):
    return Verdict.from_dict(json.loads(text))
