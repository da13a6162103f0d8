"""Run reports and their json / csv / text renderings."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import QnilError

__all__ = ["Report", "write_report", "read_report", "iter_sequences", "render_text", "IoError"]


class IoError(QnilError):
    pass


@dataclass
class Report:
    scenario: str
    command: str
    input_digest: str
    params: dict
    results: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "command": self.command,
            "timestamp": self.timestamp,
            "version": self.version,
            "input_digest": self.input_digest,
            "params": self.params,
            "results": self.results,
            "warnings": self.warnings,
            "failures": self.failures,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Report":
        return cls(
            scenario=d["scenario"],
            command=d["command"],
            input_digest=d["input_digest"],
            params=d["params"],
            results=d["results"],
            warnings=d.get("warnings", []),
            failures=d.get("failures", []),
            version=d.get("version", ""),
            timestamp=d.get("timestamp", ""),
        )

    def equivalent(self, other: "Report") -> bool:
        """Equality ignoring the timestamp."""
        a, b = self.to_json(), other.to_json()
        a.pop("timestamp")
        b.pop("timestamp")
        return a == b


def dumps(report: Report) -> str:
    return json.dumps(report.to_json(), indent=2, allow_nan=False) + "\n"


def read_report(path_or_text) -> Report:
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and not path_or_text.lstrip().startswith("{")):
        text = Path(path_or_text).read_text()
    return Report.from_json(json.loads(text))


def iter_sequences(obj, prefix: str = ""):
    """Yield ``(label, sequence_json)`` for every radius sequence nested in ``obj``."""
    if isinstance(obj, dict):
        if "points" in obj and "kind" in obj:
            yield prefix or "sequence", obj
            return
        for k, v in obj.items():
            yield from iter_sequences(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from iter_sequences(v, f"{prefix}[{i}]")


def _csv_text(seq: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "root", "log_norm"])
    for p in seq["points"]:
        w.writerow([p["n"], repr(p["root"]), "" if p["log_norm"] is None else repr(p["log_norm"])])
    return buf.getvalue()


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def _fmt_word(word) -> str:
    return " ".join(str(a) for a in word) if word else "(none)"


def render_text(report: Report) -> str:
    out = [f"qnil {report.version}  command={report.command}  scenario={report.scenario}",
           f"input digest {report.input_digest}",
           "params: " + ", ".join(f"{k}={v}" for k, v in report.params.items())]
    res = report.results
    for label, seq in iter_sequences(res):
        pts = seq["points"]
        last = pts[-1] if pts else None
        tag = " (lower bound)" if seq.get("lower_bound_only") else ""
        if last is not None:
            out.append(f"sequence {label}: kind={seq['kind']}{tag} n={last['n']} root={last['root']:.6g}")

    def walk(obj, path=""):
        if isinstance(obj, dict):
            if "status" in obj and "witness" in obj:
                out.append(f"verdict {path}: {obj['status']} (final root {obj['final_root']:.6g}, "
                           f"depth {obj['depth']}, threshold {obj['threshold']:g}, strategy {obj['strategy']})")
                if obj["witness"] is not None:
                    out.append(f"  witness word: {_fmt_word(obj['witness'])}")
                return
            if "kind" in obj and "checks" in obj:
                c = obj["checks"]
                out.append(f"subspace {path}: kind={obj['kind']} anchor k={obj['anchor_index']} "
                           f"dimension={c['dimension']} window={c['truncation_dim']} nontrivial={c['nontrivial']}")
                J = obj.get("ideal_support")
                out.append(f"  ideal support J={J} is_ideal={obj.get('is_ideal')}")
                out.append(f"  f_k vanishing max={c['fk_vanishing_max']}")
                out.append(f"  invariance residuals={c['invariance_residuals']} (interior dim {c['interior_dim']}, "
                           f"saturated {c['saturated']})")
                if obj.get("flags"):
                    out.append(f"  flags={obj['flags']}")
                return
            if "lower" in obj and "upper" in obj and "truncation_dim" in obj:
                out.append(f"jsr {path}: lower={obj['lower']:.12g} upper={obj['upper']:.12g} "
                           f"depth={obj['depth']} window={obj['truncation_dim']}")
                return
            if "points" in obj:
                return
            for k, v in obj.items():
                walk(v, f"{path}.{k}" if path else k)
            if "b_residuals" in obj:
                out.append(f"  b residuals={obj['b_residuals']}")
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(v, f"{path}[{i}]")

    walk(res)
    for a in res.get("assertions", []):
        out.append(f"[{'PASS' if a['passed'] else 'FAIL'}] {a['name']}: {a['detail']}")
    for w in report.warnings:
        out.append(f"warning: {w}")
    for f in report.failures:
        out.append(f"failure: {f.get('type')}: {f.get('message')}")
    return "\n".join(out) + "\n"


def write_report(report: Report, fmt: str = "json", destination: str | Path | None = None) -> list[Path]:
    """Write ``report``; returns the files written (empty when printing to stdout).

    ``json`` goes to ``destination`` (a file, or stdout for ``None``/``-``).
    ``csv`` writes one ``<label>.csv`` per radius sequence into the
    ``destination`` directory.  ``text`` is a human summary.
    """
    try:
        if fmt == "json":
            return _emit(dumps(report), destination)
        if fmt == "text":
            return _emit(render_text(report), destination)
        if fmt == "csv":
            if destination in (None, "-"):
                raise IoError("csv output needs a destination directory")
            d = Path(destination)
            d.mkdir(parents=True, exist_ok=True)
            written = []
            for label, seq in iter_sequences(report.results):
                p = d / f"{_safe(label)}.csv"
                p.write_text(_csv_text(seq))
                written.append(p)
            return written
    except OSError as exc:
        raise IoError(str(exc)) from exc
    raise ValueError(f"unknown format {fmt!r}")


def _emit(text: str, destination) -> list[Path]:
    if destination in (None, "-"):
        sys.stdout.write(text)
        return []
    p = Path(destination)
    p.write_text(text)
    return [p]
