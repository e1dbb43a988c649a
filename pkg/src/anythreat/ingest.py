"""CERT-style activity logs to community session-slot datasets."""
from __future__ import annotations

import csv
import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .datamodel import CommunityDataset, FeatureSchema, Instance, Label, normalize

log = logging.getLogger(__name__)

DATE_FORMAT = "%m/%d/%Y %H:%M:%S"
KINDS = ("logon", "device", "file", "http", "email")

COLUMNS = {
    "logon": ("id", "date", "user", "pc", "activity"),
    "device": ("id", "date", "user", "pc", "activity"),
    "file": ("id", "date", "user", "pc", "filename"),
    "http": ("id", "date", "user", "pc", "url"),
    "email": ("id", "date", "user", "pc", "to", "cc", "bcc", "from", "size", "attachment_count"),
}

FEATURES = (
    ("n_logon", "frequency"),
    ("n_device_connect", "frequency"),
    ("n_file_copy", "frequency"),
    ("n_http", "frequency"),
    ("n_email", "frequency"),
    ("n_logon_afterhours", "time"),
    ("n_device_afterhours", "time"),
    ("n_http_afterhours", "time"),
    ("any_bcc", "boolean"),
    ("any_external_recipient", "boolean"),
    ("any_sensitive_extension", "boolean"),
    ("n_jobsite_url", "attribute"),
    ("n_leaksite_url", "attribute"),
    ("total_recipients", "other"),
    ("total_attachments", "other"),
    ("distinct_pcs", "other"),
    ("n_file_afterhours", "other"),
    ("n_email_external", "other"),
)

DEFAULT_SCHEMA = FeatureSchema([n for n, _ in FEATURES], [g for _, g in FEATURES])

MAX_BAD_FRACTION = 0.10


class LogError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    work_hours: Tuple[int, int] = (8, 17)
    sensitive_extensions: tuple = (".zip", ".rar", ".7z", ".docx", ".pdf", ".key")
    job_sites: tuple = ("monster.com", "careerbuilder.com", "indeed.com", "linkedin.com/jobs",
                        "simplyhired.com", "jobhuntersbible.com")
    leak_sites: tuple = ("wikileaks.org", "leakedsource.com", "cryptome.org")
    internal_domains: tuple = ("dtaa.com",)

    @classmethod
    def from_dict(cls, d: Mapping):
        kw = {}
        for key, v in d.items():
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown feature setting {key!r}")
            kw[key] = tuple(v)
        return cls(**kw)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Event:
    kind: str
    timestamp: datetime
    user: str
    pc: str
    attrs: dict = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class Insider:
    scenario: str
    start: datetime
    end: datetime


@dataclass(frozen=True)
class GroundTruth:
    insiders: Dict[str, Insider] = field(default_factory=dict)

    def __post_init__(self):
        for user, ins in self.insiders.items():
            if ins.start > ins.end:
                raise ValueError(f"insider {user}: window start after end")

    def is_malicious(self, user: str, ts: datetime) -> bool:
        ins = self.insiders.get(user)
        return ins is not None and ins.start <= ts <= ins.end


@dataclass(frozen=True)
class SessionSlot:
    index: int
    start: datetime
    end: datetime


def slot_of(ts: datetime, epoch: datetime, slot_hours: int = 4) -> int:
    return int((ts - epoch) // timedelta(hours=slot_hours))


def session_slot(index: int, epoch: datetime, slot_hours: int = 4) -> SessionSlot:
    start = epoch + timedelta(hours=slot_hours * index)
    return SessionSlot(index, start, start + timedelta(hours=slot_hours))


def _kind_of(path: Path) -> str:
    kind = path.stem.lower()
    if kind not in COLUMNS:
        raise LogError(f"{path}: cannot infer log kind from file name")
    return kind


def read_log_file(path, kind: Optional[str] = None, schema_map: Optional[Mapping] = None):
    """Parse one log file; returns (events, number of skipped rows).

    ``schema_map`` maps canonical column names to the names used in the file.
    """
    path = Path(path)
    kind = kind or _kind_of(path)
    names = {c: (schema_map or {}).get(c, c) for c in COLUMNS[kind]}
    events, bad, total = [], 0, 0
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise LogError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        missing = [v for v in names.values() if v not in (reader.fieldnames or [])]
        if missing:
            raise LogError(f"{path}: header lacks columns {missing}")
        extra = [c for c in COLUMNS[kind] if c not in ("id", "date", "user", "pc")]
        for row in reader:
            total += 1
            try:
                ts = datetime.strptime(row[names["date"]], DATE_FORMAT)
                user = row[names["user"]]
                if not user:
                    raise ValueError("empty user")
            except (ValueError, TypeError):
                bad += 1
                continue
            attrs = {c: row[names[c]] or "" for c in extra}
            events.append(Event(kind, ts, user, row[names["pc"]] or "", attrs))
    if total and bad / total > MAX_BAD_FRACTION:
        raise LogError(f"{path}: {bad}/{total} rows failed to parse; schema mismatch?")
    if bad:
        log.warning("%s: skipped %d malformed rows", path, bad)
    return events, bad


def parse_logs(paths: Iterable, schema_map: Optional[Mapping] = None):
    """Parse log files into one timestamp-sorted event list."""
    events = []
    for p in paths:
        evs, _ = read_log_file(p, schema_map=schema_map)
        events.extend(evs)
    events.sort(key=lambda e: e.timestamp)
    return events


def read_roles(path) -> Dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["user"]: row["role"] for row in csv.DictReader(fh)}


def read_truth(path) -> GroundTruth:
    insiders = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            insiders[row["user"]] = Insider(
                row["scenario"],
                datetime.strptime(row["start"], DATE_FORMAT),
                datetime.strptime(row["end"], DATE_FORMAT))
    return GroundTruth(insiders)


def _recipients(ev: Event):
    out = []
    for key in ("to", "cc", "bcc"):
        out.extend(r for r in ev.attrs.get(key, "").split(";") if r)
    return out


def _is_external(addr: str, internal) -> bool:
    domain = addr.rsplit("@", 1)[-1].lower()
    return domain not in internal


def extract_features(events: Sequence[Event], work_hours=(8, 17),
                     config: FeatureConfig = FeatureConfig()) -> list:
    """Raw (unnormalised) 18-feature vector for one user's events in one slot."""
    start, end = work_hours
    internal = {d.lower() for d in config.internal_domains}
    sensitive = tuple(e.lower() for e in config.sensitive_extensions)
    v = dict.fromkeys((n for n, _ in FEATURES), 0)
    pcs = set()
    for ev in events:
        after = not (start <= ev.timestamp.hour < end)
        pcs.add(ev.pc)
        if ev.kind == "logon":
            if ev.attrs.get("activity", "").lower() == "logon":
                v["n_logon"] += 1
                v["n_logon_afterhours"] += after
        elif ev.kind == "device":
            if ev.attrs.get("activity", "").lower() == "connect":
                v["n_device_connect"] += 1
                v["n_device_afterhours"] += after
        elif ev.kind == "file":
            v["n_file_copy"] += 1
            v["n_file_afterhours"] += after
            if ev.attrs.get("filename", "").lower().endswith(sensitive):
                v["any_sensitive_extension"] = 1
        elif ev.kind == "http":
            url = ev.attrs.get("url", "").lower()
            v["n_http"] += 1
            v["n_http_afterhours"] += after
            v["n_jobsite_url"] += any(s in url for s in config.job_sites)
            v["n_leaksite_url"] += any(s in url for s in config.leak_sites)
        elif ev.kind == "email":
            rcpt = _recipients(ev)
            v["n_email"] += 1
            v["total_recipients"] += len(rcpt)
            try:
                v["total_attachments"] += int(ev.attrs.get("attachment_count") or 0)
            except ValueError:
                pass
            if ev.attrs.get("bcc"):
                v["any_bcc"] = 1
            if any(_is_external(r, internal) for r in rcpt):
                v["any_external_recipient"] = 1
                v["n_email_external"] += 1
    v["distinct_pcs"] = len(pcs)
    return [float(v[n]) for n, _ in FEATURES]


def build_dataset(events: Sequence[Event], roles: Mapping[str, str], community: str,
                  truth: GroundTruth, slot_hours: int = 4,
                  config: FeatureConfig = FeatureConfig(), epoch: Optional[datetime] = None,
                  normalized: bool = True) -> CommunityDataset:
    """One instance per (user, slot) with activity, for users of ``community``.

    Slots count from ``epoch`` (default: midnight before the first event). An
    instance is Anomalous when the user has an event inside the slot that
    falls within their ground-truth window.
    """
    users = {u for u, r in roles.items() if r == community}
    if not users:
        raise ValueError(f"community {community!r} has no users")
    if not events:
        raise ValueError("no events")
    if epoch is None:
        first = min(e.timestamp for e in events)
        epoch = first.replace(hour=0, minute=0, second=0, microsecond=0)
    buckets = defaultdict(list)
    for ev in events:
        if ev.user in users:
            buckets[(ev.user, slot_of(ev.timestamp, epoch, slot_hours))].append(ev)
    instances = []
    for (user, t) in sorted(buckets, key=lambda k: (k[1], k[0])):
        evs = buckets[(user, t)]
        bad = any(truth.is_malicious(user, e.timestamp) for e in evs)
        instances.append(Instance(
            t=t, user=user,
            x=extract_features(evs, config.work_hours, config),
            label=Label.ANOMALOUS if bad else Label.NORMAL,
            threat_id=user if bad else None))
    d = CommunityDataset(community, DEFAULT_SCHEMA, instances, slot_hours=slot_hours)
    return normalize(d) if normalized else d


def load_log_dir(directory, schema_map: Optional[Mapping] = None):
    """Read the five activity logs plus roles.csv and insiders.csv from a directory."""
    directory = Path(directory)
    paths = [directory / f"{k}.csv" for k in KINDS if (directory / f"{k}.csv").exists()]
    if not paths:
        raise LogError(f"{directory}: no activity log files found")
    events = parse_logs(paths, schema_map)
    roles = read_roles(directory / "roles.csv")
    truth_path = directory / "insiders.csv"
    truth = read_truth(truth_path) if truth_path.exists() else GroundTruth()
    return events, roles, truth


# --- dataset CSV --------------------------------------------------------

def write_dataset_csv(d: CommunityDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "t", "label", "threat_id", *d.schema.names])
        for inst in d.instances:
            w.writerow([inst.user, inst.t, inst.label.value, inst.threat_id or "",
                        *(repr(v) for v in inst.x)])
    meta = {"role": d.role, "slot_hours": d.slot_hours, "normalized": d.normalized,
            "groups": list(d.schema.groups),
            "feature_min": d.feature_min and list(d.feature_min),
            "feature_max": d.feature_max and list(d.feature_max)}
    with open(os.fspath(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def read_dataset_csv(path) -> CommunityDataset:
    with open(os.fspath(path) + ".meta.json") as fh:
        meta = json.load(fh)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[4:]
        instances = [Instance(t=int(r[1]), user=r[0], x=[float(v) for v in r[4:]],
                              label=Label(r[2]), threat_id=r[3] or None) for r in reader]
    schema = FeatureSchema(names, meta["groups"])
    return CommunityDataset(meta["role"], schema, instances, meta["slot_hours"],
                            meta["normalized"],
                            meta["feature_min"] and tuple(meta["feature_min"]),
                            meta["feature_max"] and tuple(meta["feature_max"]))
