"""Cluster JSON and static HTML pages.

Pages are rendered only from the JSON documents (cluster.json, per-experiment
reports, symbols.json), carry inline CSS and SVG, and need no network access.
"""
from __future__ import annotations

import html
import json
from pathlib import Path
from typing import Mapping, Sequence

from .clustering import ClusterResult, PurityResult, cluster_summary
from .detector import AnomalyReport, Label

CLUSTER_FILE = "cluster.json"
INDEX_FILE = "index.html"
TIMELINE_DIR = "timeline"

COLORS = {
    Label.COMMON.value: "#c8ccd2",
    Label.SPURIOUS.value: "#d62728",
    Label.MISSING.value: "#1f5fbf",
    Label.FILTERED_SPURIOUS.value: "#f2b8b8",
    Label.FILTERED_MISSING.value: "#b5c9ec",
}

_CSS = """
body { font-family: sans-serif; margin: 2em; color: #222; }
table { border-collapse: collapse; margin: 1em 0; }
td, th { border: 1px solid #ccc; padding: 3px 8px; font-size: 13px; text-align: left; }
.strip { display: flex; flex-wrap: wrap; gap: 2px; max-width: 1100px; }
.ev { width: 12px; height: 22px; display: inline-block; }
.legend span { display: inline-block; margin-right: 1em; }
.legend i { display: inline-block; width: 12px; height: 12px; margin-right: 4px; vertical-align: middle; }
code { font-size: 12px; }
"""


def cluster_document(
    result: ClusterResult,
    curve: Sequence[tuple[int, float]],
    reports: Sequence[AnomalyReport],
    *,
    representation: str,
    seed: int,
    k_range: tuple[int, int],
    selected: bool,
    purity: PurityResult | None = None,
    modes: Mapping[str, str] | None = None,
) -> dict:
    doc = {
        "format": "tracefault-cluster",
        "version": 1,
        "representation": representation,
        "seed": seed,
        "k_range": list(k_range),
        "selected": selected,
        "k_curve": [[k, s] for k, s in curve],
        "K": result.K,
        "global_silhouette": result.global_silhouette,
        "medoids": result.medoids,
        "assignments": result.assignments,
        "clusters": cluster_summary(result, reports),
        "experiments": {
            r.experiment_id: {"spurious": r.count(Label.SPURIOUS), "missing": r.count(Label.MISSING)} for r in reports
        },
    }
    if purity is not None:
        doc["purity"] = {
            "overall": purity.overall,
            "per_cluster": {str(k): v for k, v in purity.per_cluster.items()},
            "majority": {str(k): v for k, v in purity.majority.items()},
        }
    if modes is not None:
        doc["modes"] = dict(modes)
    return doc


def _page(title: str, body: str) -> str:
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(title)}</title><style>{_CSS}</style></head>\n"
        f"<body>\n<h1>{html.escape(title)}</h1>\n{body}\n</body></html>\n"
    )


def _label(labels: Sequence[str], sym: int) -> str:
    return labels[sym] if 0 <= sym < len(labels) else f"#{sym}"


def _bar_chart(clusters: Sequence[dict], labels: Sequence[str]) -> str:
    total = sum(c["size"] for c in clusters) or 1
    row, width = 34, 420
    h = row * len(clusters) + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + 560}" height="{h}">']
    for i, c in enumerate(clusters):
        y = 5 + i * row
        w = max(1, round(width * c["size"] / total))
        tags = [f"+{_label(labels, s)}" for s, _ in c["top_spurious"]] + [f"-{_label(labels, s)}" for s, _ in c["top_missing"]]
        text = html.escape(", ".join(tags) or "no confirmed anomalies")
        parts.append(f'<text x="0" y="{y + 18}" font-size="13">C{c["cluster"]}</text>')
        parts.append(f'<rect x="40" y="{y}" width="{w}" height="24" fill="#4c72b0"/>')
        parts.append(
            f'<text x="{46 + w}" y="{y + 17}" font-size="12">{c["size"]} ({100 * c["size"] / total:.1f}%) {text}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)


def _curve_chart(curve: Sequence[Sequence[float]], chosen: int) -> str:
    if len(curve) < 2:
        return ""
    w, h, pad = 420, 160, 30
    ks = [k for k, _ in curve]
    ss = [s for _, s in curve]
    lo, hi = min(ss + [0.0]), max(ss + [1.0])
    x = lambda k: pad + (w - 2 * pad) * (k - ks[0]) / max(1, ks[-1] - ks[0])
    y = lambda s: h - pad - (h - 2 * pad) * (s - lo) / ((hi - lo) or 1)
    pts = " ".join(f"{x(k):.1f},{y(s):.1f}" for k, s in curve)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">']
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#333"/>')
    for k, s in curve:
        fill = "#d62728" if k == chosen else "#333"
        parts.append(f'<circle cx="{x(k):.1f}" cy="{y(s):.1f}" r="3" fill="{fill}"><title>K={k} s={s:.3f}</title></circle>')
    parts.append(f'<text x="{pad}" y="{h - 6}" font-size="11">K={ks[0]}</text>')
    parts.append(f'<text x="{w - pad - 30}" y="{h - 6}" font-size="11">K={ks[-1]}</text>')
    parts.append(f'<text x="2" y="12" font-size="11">silhouette</text></svg>')
    return "".join(parts)


def render_index(doc: Mapping, labels: Sequence[str]) -> str:
    body = [f"<p>Representation <b>{html.escape(doc['representation'])}</b>, K = <b>{doc['K']}</b>"]
    if doc.get("global_silhouette") is not None:
        body.append(f", global silhouette {doc['global_silhouette']:.3f}")
    body.append(f", {len(doc['assignments'])} experiments.</p>")
    if "purity" in doc:
        body.append(f"<p>Purity against ground truth: <b>{doc['purity']['overall']:.3f}</b></p>")
    body.append("<h2>Failure-mode distribution</h2>")
    body.append("<p>+ spurious, - missing (most frequent confirmed anomalies per cluster)</p>")
    body.append(_bar_chart(doc["clusters"], labels))
    if doc.get("selected"):
        body.append("<h2>Silhouette by K</h2>")
        body.append(_curve_chart(doc["k_curve"], doc["K"]))
    body.append("<h2>Experiments</h2><table><tr><th>experiment</th><th>cluster</th><th>spurious</th><th>missing</th>")
    modes = doc.get("modes")
    if modes:
        body.append("<th>planted mode</th>")
    body.append("</tr>")
    for eid, k in sorted(doc["assignments"].items(), key=lambda kv: (kv[1], kv[0])):
        c = doc["experiments"].get(eid, {})
        e = html.escape(eid)
        body.append(
            f'<tr><td><a href="{TIMELINE_DIR}/{e}.html">{e}</a></td><td>C{k}</td>'
            f"<td>{c.get('spurious', '')}</td><td>{c.get('missing', '')}</td>"
        )
        if modes:
            body.append(f"<td>{html.escape(str(modes.get(eid, '')))}</td>")
        body.append("</tr>")
    body.append("</table>")
    return _page("Failure modes", "".join(body))


def _legend() -> str:
    items = "".join(f'<span><i style="background:{c}"></i>{html.escape(k)}</span>' for k, c in COLORS.items())
    return f'<p class="legend">{items}</p>'


def render_timeline(report: Mapping, labels: Sequence[str], cluster: int | None = None) -> str:
    eid = report["experiment_id"]
    body = ['<p><a href="../index.html">back to distribution</a></p>']
    ref = report.get("selected_reference_id")
    body.append(f"<p>Reference trace <code>{html.escape(str(ref))}</code>")
    if report.get("nlcs") is not None:
        body.append(f", nLCS {report['nlcs']:.3f}")
    if cluster is not None:
        body.append(f", cluster C{cluster}")
    body.append("</p>")
    if report.get("error"):
        body.append(f"<p><b>analysis failed:</b> {html.escape(report['error'])}</p>")
    body.append(_legend())
    body.append('<div class="strip">')
    rows = []
    for ev in report["events"]:
        name = _label(labels, ev["symbol"])
        tip = f"{ev['label']} @{ev['position']}: {name}"
        if ev.get("probability") is not None:
            tip += f" p={ev['probability']:.3f}"
        body.append(f'<span class="ev" style="background:{COLORS[ev["label"]]}" title="{html.escape(tip)}"></span>')
        if ev["label"] != Label.COMMON.value:
            p = "" if ev.get("probability") is None else f"{ev['probability']:.3f}"
            rows.append(
                f'<tr><td style="color:{COLORS[ev["label"]]}">{ev["label"]}</td><td>{ev["position"]}</td>'
                f"<td><code>{html.escape(name)}</code></td><td>{p}</td></tr>"
            )
    body.append("</div>")
    body.append("<h2>Differences</h2><table><tr><th>label</th><th>position</th><th>event</th><th>probability</th></tr>")
    body.extend(rows)
    body.append("</table>")
    return _page(f"Timeline {eid}", "".join(body))


def write_cluster_report(doc: Mapping, reports: Sequence[AnomalyReport], labels: Sequence[str], out_dir: Path | str) -> Path:
    out = Path(out_dir)
    (out / TIMELINE_DIR).mkdir(parents=True, exist_ok=True)
    (out / CLUSTER_FILE).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    (out / INDEX_FILE).write_text(render_index(doc, labels), encoding="utf-8")
    for r in reports:
        page = render_timeline(r.to_dict(), labels, doc["assignments"].get(r.experiment_id))
        (out / TIMELINE_DIR / f"{r.experiment_id}.html").write_text(page, encoding="utf-8")
    return out
