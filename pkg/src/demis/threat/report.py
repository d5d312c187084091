"""Markdown + JSON threat report. Output is a pure function of the inputs."""

from __future__ import annotations

import json

from .catalog import BAND_LABELS, BANDS, IMPACTS
from .cvss import cvss_base_score, severity

NOT_EVALUATED = "_not evaluated_"


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _metrics_doc(metric_reports) -> dict | None:
    if metric_reports is None:
        return None
    if hasattr(metric_reports, "rows"):
        metric_reports = {"attack": metric_reports}
    out = {}
    for label in sorted(metric_reports):
        rep = metric_reports[label]
        out[label] = {
            "rows": [
                {"frame": r.frame, "entropy_orig": round(r.entropy_original, 4),
                 "entropy_att": round(r.entropy_attacked, 4),
                 "mse": round(r.mse, 4), "ssim": round(r.ssim, 4)}
                for r in rep.rows
            ],
        }
    return out


def build_document(catalog, risk_matrix=None, cvss=None, adt_result=None,
                   metric_reports=None, seed=None) -> dict:
    doc = {
        "asset": catalog.asset,
        "seed": seed,
        "threats": [
            {"name": t.name, "title": t.title, "attack_vectors": list(t.attack_vectors),
             "vulnerabilities": list(t.vulnerabilities), "mitigations": list(t.mitigations)}
            for t in catalog
        ],
        "risk_matrix": None,
        "cvss": None,
        "adt": adt_result,
        "metrics": _metrics_doc(metric_reports),
    }
    if risk_matrix is not None:
        doc["risk_matrix"] = {t.name: risk_matrix.grid(t.name) for t in catalog}
    if cvss is not None:
        doc["cvss"] = {}
        for name in sorted(cvss):
            score = cvss_base_score(cvss[name])
            doc["cvss"][name] = {"vector": str(cvss[name]), "score": score,
                                 "severity": severity(score)}
    return doc


def _markdown(doc: dict, catalog) -> str:
    lines = [f"# DEMIS threat report: {doc['asset']}", ""]
    if doc["seed"] is not None:
        lines += [f"Seed: {doc['seed']}", ""]

    lines += ["## Threat catalog", "",
              "| Threat | Attack vectors | Vulnerabilities | Mitigations |",
              "|---|---|---|---|"]
    for t in doc["threats"]:
        lines.append("| {} | {} | {} | {} |".format(
            t["title"], "; ".join(t["attack_vectors"]), "; ".join(t["vulnerabilities"]),
            "; ".join(t["mitigations"])))
    lines.append("")

    lines += ["## Risk matrix", ""]
    if doc["risk_matrix"] is None:
        lines += [NOT_EVALUATED, ""]
    else:
        for t in catalog:
            grid = doc["risk_matrix"][t.name]
            lines += [f"### {t.title}", "",
                      "| Likelihood | " + " | ".join(i.capitalize() for i in IMPACTS) + " |",
                      "|---|" + "---|" * len(IMPACTS)]
            for band in reversed(BANDS):
                cells = [", ".join(grid[band][i]) or "-" for i in IMPACTS]
                lines.append(f"| {BAND_LABELS[band]} | " + " | ".join(cells) + " |")
            lines.append("")

    lines += ["## CVSS v3.1 base scores", ""]
    if doc["cvss"] is None:
        lines += [NOT_EVALUATED, ""]
    else:
        lines += ["| Threat | Vector | Score | Severity |", "|---|---|---|---|"]
        for name, r in doc["cvss"].items():
            lines.append(f"| {name} | `{r['vector']}` | {r['score']:.1f} | {r['severity']} |")
        lines.append("")

    lines += ["## Attack-defense tree", ""]
    adt = doc["adt"]
    if adt is None:
        lines += [NOT_EVALUATED, ""]
    else:
        lines.append(f"- satisfied attacks: {', '.join(adt.get('satisfied', [])) or 'none'}")
        lines.append(f"- active defenses: {', '.join(adt.get('active', [])) or 'none'}")
        lines.append(f"- root compromised: {'yes' if adt.get('compromised') else 'no'}")
        if adt.get("minimal_attack_sets") is not None:
            lines.append("- minimal successful attack sets:")
            for s in adt["minimal_attack_sets"]:
                lines.append(f"  - {{{', '.join(s)}}}")
        lines.append("")

    lines += ["## Attack damage metrics", ""]
    if doc["metrics"] is None:
        lines += [NOT_EVALUATED, ""]
    else:
        for label, rep in doc["metrics"].items():
            lines += [f"### {label}", "", "| Frame | Entropy (orig) | Entropy (attacked) | MSE | SSIM |",
                      "|---|---|---|---|---|"]
            for r in rep["rows"]:
                lines.append(f"| {r['frame']} | {_fmt(r['entropy_orig'])} | {_fmt(r['entropy_att'])} "
                             f"| {_fmt(r['mse'])} | {_fmt(r['ssim'])} |")
            lines.append("")
    return "\n".join(lines)


def render_report(catalog, risk_matrix=None, cvss=None, adt_result=None,
                  metric_reports=None, seed=None) -> tuple[str, str]:
    """Return ``(markdown, json_text)``; missing sections render as not evaluated."""
    doc = build_document(catalog, risk_matrix, cvss, adt_result, metric_reports, seed)
    return _markdown(doc, catalog), json.dumps(doc, indent=2, sort_keys=True) + "\n"
