"""Circulation evidence and the registry of proven circulation bounds.

Counting how often a longitude crosses one spanning disk gives an upper bound on
the circulation for that meridian, never a lower bound: circulation is a minimum
over all longitudes and all disks. Counts are therefore reported as evidence.
The classifier only trusts registry entries or a user-declared order.
"""

import json
from dataclasses import asdict, dataclass
from types import MappingProxyType

from .errors import LongitudeCheckFailed
from .geom import as_one_cycle, count_disk_intersections
from .package import canonical_longitude, meridian_disk

CANONICAL = "canonical"
USER_SUPPLIED = "user_supplied"
CANONICAL_MERIDIAN = "canonical_meridian"

FREEDMAN_SKORA = (
    "Freedman and Skora, Strange actions of groups on spheres: "
    "the Bing double and the Whitehead continuum have circulation at least 2"
)


@dataclass(frozen=True)
class CirculationEvidence:
    package_id: str
    k: int
    intersection_count: int
    longitude_source: str = CANONICAL
    disk_source: str = CANONICAL_MERIDIAN

    def __post_init__(self):
        if self.intersection_count < 0:
            raise ValueError("intersection count cannot be negative")

    def consistent_with(self, bound):
        """True when the count is at least C * omega**k for the given bound."""
        return self.intersection_count >= bound.C * bound.omega**self.k

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CirculationBound:
    package_id: str
    omega: float
    C: float = 1.0
    provenance: str = ""

    def __post_init__(self):
        if not self.omega >= 1:
            raise ValueError("omega must be at least 1")
        if not self.C > 0:
            raise ValueError("C must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(
            str(data["package_id"]),
            data["omega"],
            data.get("C", 1.0),
            str(data.get("provenance", "")),
        )


BUILTIN_BOUNDS = (
    CirculationBound("bing", 2, 1, FREEDMAN_SKORA),
    CirculationBound("whitehead", 2, 1, FREEDMAN_SKORA),
)


class Registry:
    """Read-only map from package id to its proven circulation bound."""

    def __init__(self, bounds=BUILTIN_BOUNDS):
        self._bounds = MappingProxyType({b.package_id: b for b in bounds})

    def lookup(self, package_id):
        return self._bounds.get(package_id)

    def __contains__(self, package_id):
        return package_id in self._bounds

    def __iter__(self):
        return iter(sorted(self._bounds))

    def extended(self, bounds):
        """New registry with extra entries; later entries replace earlier ones."""
        return Registry(list(self._bounds.values()) + list(bounds))

    def extended_from_json(self, path):
        """Add entries from a file holding one bound object or a list of them."""
        with open(path) as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = [data]
        return self.extended(CirculationBound.from_dict(d) for d in data)


DEFAULT_REGISTRY = Registry()


def registry_lookup(package_id, registry=DEFAULT_REGISTRY):
    """Proven bound for ``package_id`` or None."""
    return registry.lookup(package_id)


def empirical_circulation(pkg, k, sigma=None, disk=None):
    """Crossings of a longitude with a spanning disk of the canonical meridian.

    ``sigma`` and ``disk`` default to the canonical level-k longitude and the
    canonical meridian disk. A supplied ``sigma`` must meet the canonical disk,
    otherwise it is not a longitude candidate.
    """
    _, canonical_disk = meridian_disk(pkg)
    if sigma is None:
        sigma = canonical_longitude(pkg, k)
        longitude_source = CANONICAL
    else:
        sigma = as_one_cycle(sigma)
        if count_disk_intersections(sigma, canonical_disk) < 1:
            raise LongitudeCheckFailed("supplied cycle misses the canonical meridian disk")
        longitude_source = USER_SUPPLIED
    disk_source = CANONICAL_MERIDIAN if disk is None else USER_SUPPLIED
    count = count_disk_intersections(sigma, canonical_disk if disk is None else disk)
    return CirculationEvidence(pkg.package_id, int(k), int(count), longitude_source, disk_source)
