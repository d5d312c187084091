"""Threat catalog and risk-matrix placement."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

DEMIS_ORDER = (
    "DefectsOnNetwork",
    "ExposureOfInformation",
    "ModificationOfBytes",
    "InjectionOfBytes",
    "SpoofingOfVideoContent",
)
BANDS = ("low", "mid", "high")
IMPACTS = ("low", "medium", "high")
BAND_LABELS = {"low": "0 - 33%", "mid": "34% - 66%", "high": "67% - 100%"}


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class ThreatEntry:
    name: str
    title: str
    attack_vectors: tuple[str, ...]
    vulnerabilities: tuple[str, ...]
    mitigations: tuple[str, ...]
    aliases: dict = field(default_factory=dict, compare=False, hash=False)

    def resolve_vector(self, vector: str) -> str:
        key = vector.strip().lower()
        for v in self.attack_vectors:
            if v.lower() == key:
                return v
        for alias, v in self.aliases.items():
            if alias.lower() == key:
                return v
        raise CatalogError(f"{self.name}: unknown attack vector {vector!r}")


@dataclass
class ThreatCatalog:
    asset: str
    threats: list[ThreatEntry]

    def __iter__(self):
        return iter(self.threats)

    def __len__(self):
        return len(self.threats)

    def __getitem__(self, name: str) -> ThreatEntry:
        for t in self.threats:
            if t.name == name:
                return t
        raise CatalogError(f"unknown threat {name!r}")

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.threats]


def _str_list(obj, key, where) -> tuple[str, ...]:
    val = obj.get(key)
    if not isinstance(val, list) or not val or not all(isinstance(s, str) and s for s in val):
        raise CatalogError(f"{where}: '{key}' must be a non-empty list of strings")
    return tuple(val)


def parse_catalog(data: dict) -> ThreatCatalog:
    """Validate a decoded catalog document.

    Schema::

        {"asset": str,
         "threats": [{"name", "title", "attack_vectors": [str],
                      "vulnerabilities": [str], "mitigations": [str],
                      "aliases": {alias: vector}}]}

    The five DEMIS threats must all be present, in acronym order; extra
    threats may follow them.
    """
    if not isinstance(data, dict) or not isinstance(data.get("threats"), list):
        raise CatalogError("catalog must be an object with a 'threats' list")
    threats = []
    for i, t in enumerate(data["threats"]):
        if not isinstance(t, dict) or not isinstance(t.get("name"), str):
            raise CatalogError(f"threat #{i}: missing name")
        where = f"threat {t['name']}"
        vectors = _str_list(t, "attack_vectors", where)
        aliases = t.get("aliases", {})
        if not isinstance(aliases, dict) or any(v not in vectors for v in aliases.values()):
            raise CatalogError(f"{where}: aliases must map to listed attack vectors")
        threats.append(ThreatEntry(
            name=t["name"],
            title=t.get("title", t["name"]),
            attack_vectors=vectors,
            vulnerabilities=_str_list(t, "vulnerabilities", where),
            mitigations=_str_list(t, "mitigations", where),
            aliases=dict(aliases),
        ))
    names = [t.name for t in threats]
    if len(set(names)) != len(names):
        raise CatalogError("duplicate threat names")
    if tuple(names[:5]) != DEMIS_ORDER:
        raise CatalogError(
            f"catalog must start with the five DEMIS threats {list(DEMIS_ORDER)}, got {names}"
        )
    return ThreatCatalog(data.get("asset", "Encrypted video"), threats)


def _bundled(name: str) -> str:
    return resources.files("demis.data").joinpath(name).read_text(encoding="utf-8")


def load_json(path=None, bundled: str = ""):
    try:
        text = Path(path).read_text(encoding="utf-8") if path else _bundled(bundled)
        return json.loads(text)
    except OSError as exc:
        raise CatalogError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path or bundled}: malformed JSON ({exc})") from None


def load_catalog(path=None) -> ThreatCatalog:
    """Load a catalog file, or the bundled ``demis_catalog.json``."""
    return parse_catalog(load_json(path, "demis_catalog.json"))


# -- risk matrix -------------------------------------------------------------

@dataclass(frozen=True)
class RiskCell:
    threat: str
    vector: str
    likelihood_band: str
    impact: str
    likelihood_pct: float | None = None


def likelihood_band(pct: float) -> str:
    """Bands: 0-33 low, 34-66 mid, 67-100 high; fractional values round down."""
    if not 0 <= pct <= 100:
        raise CatalogError(f"likelihood {pct}% outside 0..100")
    p = int(pct)
    if p <= 33:
        return "low"
    if p <= 66:
        return "mid"
    return "high"


def place_risk(catalog: ThreatCatalog, threat: str, vector: str, likelihood_pct: float,
               impact: str) -> RiskCell:
    entry = catalog[threat]
    canonical = entry.resolve_vector(vector)
    if impact not in IMPACTS:
        raise CatalogError(f"unknown impact {impact!r}; expected one of {IMPACTS}")
    return RiskCell(entry.name, canonical, likelihood_band(likelihood_pct), impact, likelihood_pct)


class RiskMatrix:
    """Per-threat grid of cells; each vector may be placed once per threat."""

    def __init__(self, catalog: ThreatCatalog):
        self.catalog = catalog
        self.cells: list[RiskCell] = []

    def place(self, threat: str, vector: str, likelihood_pct: float, impact: str) -> RiskCell:
        cell = place_risk(self.catalog, threat, vector, likelihood_pct, impact)
        if any(c.threat == cell.threat and c.vector == cell.vector for c in self.cells):
            raise CatalogError(f"{cell.threat}: vector {cell.vector!r} already placed")
        self.cells.append(cell)
        return cell

    def grid(self, threat: str) -> dict:
        """{band: {impact: [vectors]}} for one threat."""
        g = {b: {i: [] for i in IMPACTS} for b in BANDS}
        for c in self.cells:
            if c.threat == threat:
                g[c.likelihood_band][c.impact].append(c.vector)
        return g


BAND_MIDPOINTS = {"low": 16.0, "mid": 50.0, "high": 83.0}


def load_risk_matrix(catalog: ThreatCatalog, path=None) -> RiskMatrix:
    """Load vector placements (``{threat: {vector: {"band"|"pct", "impact"}}}``)."""
    data = load_json(path, "demis_risk_matrix.json")
    if not isinstance(data, dict):
        raise CatalogError("risk matrix must be an object keyed by threat")
    m = RiskMatrix(catalog)
    for threat, vectors in data.items():
        if threat.startswith("_"):
            continue
        for vector, spec in vectors.items():
            if "pct" in spec:
                pct = float(spec["pct"])
            elif spec.get("band") in BAND_MIDPOINTS:
                pct = BAND_MIDPOINTS[spec["band"]]
            else:
                raise CatalogError(f"{threat}/{vector}: need 'pct' or a valid 'band'")
            cell = m.place(threat, vector, pct, spec.get("impact", ""))
            if "pct" not in spec:
                m.cells[-1] = RiskCell(cell.threat, cell.vector, cell.likelihood_band, cell.impact)
    return m


def load_cvss_assessment(path=None) -> dict:
    """Per-threat CVSS base vectors: ``{threat: "AV:.../A:H"}``."""
    from .cvss import CvssVector

    data = load_json(path, "demis_cvss.json")
    return {k: CvssVector.parse(v) for k, v in data.items() if not k.startswith("_")}
