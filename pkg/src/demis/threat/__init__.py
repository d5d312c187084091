"""DEMIS threat model: catalog, risk matrix, CVSS base scores, attack-defense trees."""

from .adt import AdtNode, AttackDefenseTree, adt_enumerate, adt_evaluate, load_adt
from .catalog import (RiskCell, RiskMatrix, ThreatCatalog, ThreatEntry, load_catalog,
                      load_cvss_assessment, load_risk_matrix, place_risk)
from .cvss import CvssVector, cvss_base_score
from .report import render_report

__all__ = [
    "AdtNode", "AttackDefenseTree", "adt_enumerate", "adt_evaluate", "load_adt",
    "RiskCell", "RiskMatrix", "ThreatCatalog", "ThreatEntry", "load_catalog",
    "load_cvss_assessment", "load_risk_matrix", "place_risk",
    "CvssVector", "cvss_base_score", "render_report",
]
