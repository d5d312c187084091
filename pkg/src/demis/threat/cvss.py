"""CVSS v3.1 base score."""

from __future__ import annotations

import math
from dataclasses import dataclass

METRICS = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")

WEIGHTS = {
    "AV": {"N": 0.85, "A": 0.62, "L": 0.55, "P": 0.2},
    "AC": {"L": 0.77, "H": 0.44},
    "UI": {"N": 0.85, "R": 0.62},
    "C": {"H": 0.56, "L": 0.22, "N": 0.0},
    "I": {"H": 0.56, "L": 0.22, "N": 0.0},
    "A": {"H": 0.56, "L": 0.22, "N": 0.0},
}
PR_WEIGHTS = {
    "U": {"N": 0.85, "L": 0.62, "H": 0.27},
    "C": {"N": 0.85, "L": 0.68, "H": 0.5},
}
VALUES = {
    "AV": ("N", "A", "L", "P"),
    "AC": ("L", "H"),
    "PR": ("N", "L", "H"),
    "UI": ("N", "R"),
    "S": ("U", "C"),
    "C": ("N", "L", "H"),
    "I": ("N", "L", "H"),
    "A": ("N", "L", "H"),
}


class CvssError(ValueError):
    pass


@dataclass(frozen=True)
class CvssVector:
    AV: str
    AC: str
    PR: str
    UI: str
    S: str
    C: str
    I: str  # noqa: E741
    A: str

    def __post_init__(self):
        for m in METRICS:
            v = getattr(self, m)
            if v not in VALUES[m]:
                raise CvssError(f"{m}:{v} is not a valid value (expected one of {VALUES[m]})")

    @classmethod
    def parse(cls, text: str) -> "CvssVector":
        text = text.strip()
        if text.startswith("CVSS:"):
            text = text.split("/", 1)[1] if "/" in text else ""
        parts = {}
        for item in filter(None, text.split("/")):
            k, sep, v = item.partition(":")
            if not sep or k not in METRICS:
                raise CvssError(f"bad CVSS component {item!r}")
            if k in parts:
                raise CvssError(f"duplicate CVSS metric {k}")
            parts[k] = v
        missing = [m for m in METRICS if m not in parts]
        if missing:
            raise CvssError(f"CVSS vector missing {','.join(missing)}")
        return cls(**parts)

    def __str__(self):
        return "/".join(f"{m}:{getattr(self, m)}" for m in METRICS)


def roundup(x: float) -> float:
    """Smallest one-decimal value >= x, computed on integers to dodge float noise."""
    i = round(x * 100000)
    if i % 10000 == 0:
        return i / 100000.0
    return (math.floor(i / 10000) + 1) / 10.0


def cvss_base_score(v: CvssVector) -> float:
    iss = 1 - (1 - WEIGHTS["C"][v.C]) * (1 - WEIGHTS["I"][v.I]) * (1 - WEIGHTS["A"][v.A])
    if v.S == "U":
        impact = 6.42 * iss
    else:
        impact = 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15
    exploitability = (8.22 * WEIGHTS["AV"][v.AV] * WEIGHTS["AC"][v.AC]
                      * PR_WEIGHTS[v.S][v.PR] * WEIGHTS["UI"][v.UI])
    if impact <= 0:
        return 0.0
    if v.S == "U":
        return roundup(min(impact + exploitability, 10))
    return roundup(min(1.08 * (impact + exploitability), 10))


def severity(score: float) -> str:
    if score == 0:
        return "None"
    if score < 4.0:
        return "Low"
    if score < 7.0:
        return "Medium"
    if score < 9.0:
        return "High"
    return "Critical"
