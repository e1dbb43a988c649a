"""Seeded generator of CERT-schema activity logs with planted insider scenarios.

Normal users follow a working-day routine with Poisson activity counts.
Each insider gets one short window in which scenario behaviour is injected
into at least three session slots:

    s1  after-hours logons, removable-device use, leak-site browsing
    s2  job-site browsing, mass file copies to a removable device
    s3  logon bursts across many machines
    s4  bcc exfiltration emails with attachments to external addresses

Every log type draws from its own random stream derived from the seed, so
adding a log type never perturbs the others.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .ingest import COLUMNS, DATE_FORMAT, GroundTruth, Insider
from .seeding import derive_rng

log = logging.getLogger(__name__)

SCENARIOS = ("s1", "s2", "s3", "s4")

BENIGN_SITES = ("dtaa.com/intranet", "google.com", "bbc.co.uk", "weather.com", "github.com",
                "stackoverflow.com", "wikipedia.org", "nytimes.com", "amazon.com", "cnn.com",
                "microsoft.com", "python.org", "reuters.com", "yahoo.com", "espn.com")
JOB_SITES = ("monster.com", "careerbuilder.com", "indeed.com", "simplyhired.com")
LEAK_SITES = ("wikileaks.org", "cryptome.org")
EXTERNAL_DOMAINS = ("gmail.com", "yahoo.com", "hotmail.com", "comcast.net")
PLAIN_EXT = (".txt", ".doc", ".jpg", ".exe", ".xls")
SENSITIVE_EXT = (".zip", ".pdf", ".docx", ".7z")


@dataclass
class SynthConfig:
    n_users: int = 80
    n_insiders: int = 12
    roles: list = field(default_factory=lambda: [["ITAdmin", 1.0]])
    days: int = 14
    scenarios: list = field(default_factory=lambda: ["s2", "s3"])
    seed: int = 42
    start: str = "01/03/2011"
    noise: dict = field(default_factory=dict)

    DEFAULT_NOISE = {
        "absent_day": 0.05,        # workday with no activity
        "weekend_session": 0.04,   # short session on a weekend day
        "early_logon": 0.03,       # logon before working hours
        "afternoon_relogon": 0.5,
        "evening_session": 0.05,   # late browsing after logoff
        "http_per_hour": (1.0, 3.0),
        "email_per_hour": (0.2, 0.6),
        "device_user": 0.3,
        "device_day": 0.2,
        "files_per_copy_day": 2.0,
        "sensitive_file": 0.08,
        "external_recipient": 0.12,
        "cc": 0.2,
        "bcc": 0.01,
        "attachments": 0.3,
        "jobsite_http": 0.002,
        # benign look-alikes of the injected behaviours
        "remote_logon_session": 0.12,  # admin work on other hosts
        "jobsite_day": 0.015,          # a few job-site visits in a day
        "bulk_copy_day": 0.03,         # device user copies many files
        "window_days": (2, 4),
    }

    def __post_init__(self):
        if self.n_users < 1 or self.n_insiders < 0:
            raise ValueError("n_users must be positive and n_insiders non-negative")
        if self.n_insiders >= self.n_users:
            raise ValueError("n_insiders must be smaller than n_users")
        total = sum(p for _, p in self.roles)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"role proportions sum to {total}, not 1")
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad or not self.scenarios:
            raise ValueError(f"scenarios must be a non-empty subset of {SCENARIOS}")
        unknown = set(self.noise) - set(self.DEFAULT_NOISE)
        if unknown:
            raise ValueError(f"unknown noise parameters {sorted(unknown)}")
        if self.days < 7:
            raise ValueError("need at least 7 days")

    @property
    def rates(self) -> dict:
        return {**self.DEFAULT_NOISE, **self.noise}

    def to_dict(self):
        return asdict(self)


class _Writer:
    def __init__(self, kind, prefix):
        self.kind, self.prefix, self.rows = kind, prefix, []

    def add(self, ts, user, pc, *rest):
        self.rows.append((ts, user, pc, rest))

    def write(self, path):
        self.rows.sort(key=lambda r: (r[0], r[1]))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS[self.kind])
            for i, (ts, user, pc, rest) in enumerate(self.rows):
                w.writerow([f"{self.prefix}{i:07d}", ts.strftime(DATE_FORMAT), user, pc, *rest])


def _at(day: datetime, hour: float) -> datetime:
    return day + timedelta(seconds=int(round(hour * 3600)))


def _assign_roles(cfg, rng):
    users = [f"U{i:04d}" for i in range(cfg.n_users)]
    counts = [int(p * cfg.n_users) for _, p in cfg.roles]
    rem = sorted(range(len(cfg.roles)), key=lambda j: -(cfg.roles[j][1] * cfg.n_users - counts[j]))
    for j in rem[: cfg.n_users - sum(counts)]:
        counts[j] += 1
    order = rng.permutation(cfg.n_users)
    roles, pos = {}, 0
    for (name, _), c in zip(cfg.roles, counts):
        for i in order[pos:pos + c]:
            roles[users[i]] = name
        pos += c
    return users, roles


def _plan_insiders(cfg, users, workdays, rng):
    """Pick insiders, their scenario, and the (day, hour) of each injection."""
    rates = cfg.rates
    chosen = sorted(rng.choice(len(users), size=cfg.n_insiders, replace=False).tolist())
    plans = {}
    for i in chosen:
        user = users[i]
        scenario = str(rng.choice(cfg.scenarios))
        lo, hi = rates["window_days"]
        length = int(rng.integers(lo, hi + 1))
        first = int(rng.integers(0, len(workdays) - length + 1))
        days = workdays[first:first + length]
        hours = []
        for day in days:
            for _ in range(int(rng.integers(1, 3))):
                hours.append((day, _scenario_hour(scenario, rng)))
        while len({(d, int(h) // 4) for d, h in hours}) < 3:
            hours.append((days[int(rng.integers(len(days)))], _scenario_hour(scenario, rng)))
        hours.sort()
        plans[user] = (scenario, hours)
    return plans


def _scenario_hour(scenario, rng):
    # injected events span at most 0.3h after ``hour``; ranges keep them in one slot
    if scenario == "s1":
        windows = [(20.0, 23.6), (0.5, 3.6)]
    elif scenario == "s3":
        windows = [(8.5, 11.6), (12.0, 15.6), (20.2, 23.5)]
    else:
        windows = [(8.5, 11.6), (12.0, 15.6)]
    lo, hi = windows[int(rng.integers(len(windows)))]
    return float(rng.uniform(lo, hi))


def _sessions(cfg, users, days, rng):
    """Per-user login sessions (logon hour, logoff hour) per day."""
    r = cfg.rates
    sessions = {}
    for user in users:
        out = []
        for day in days:
            weekend = day.weekday() >= 5
            if weekend:
                if rng.random() < r["weekend_session"]:
                    s = rng.uniform(10.0, 14.0)
                    out.append((day, s, s + rng.uniform(0.5, 2.0)))
                continue
            if rng.random() < r["absent_day"]:
                continue
            on = rng.uniform(6.5, 7.9) if rng.random() < r["early_logon"] else rng.uniform(8.0, 9.5)
            off = rng.uniform(16.8, 17.8)
            if rng.random() < r["afternoon_relogon"]:
                mid = rng.uniform(12.2, 13.5)
                out.append((day, on, mid - 0.5))
                out.append((day, mid, off))
            else:
                out.append((day, on, off))
        sessions[user] = out
    return sessions


def generate(cfg: SynthConfig, out_dir) -> GroundTruth:
    """Write logon/device/file/http/email logs, roles.csv, insiders.csv and
    manifest.json into ``out_dir``; return the planted ground truth."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc

    r = cfg.rates
    start = datetime.strptime(cfg.start, "%m/%d/%Y")
    days = [start + timedelta(days=i) for i in range(cfg.days)]
    workdays = [d for d in days if d.weekday() < 5]

    users, roles = _assign_roles(cfg, derive_rng(cfg.seed, "roles"))
    plans = _plan_insiders(cfg, users, workdays, derive_rng(cfg.seed, "insiders"))
    sessions = _sessions(cfg, users, days, derive_rng(cfg.seed, "sessions"))
    traits_rng = derive_rng(cfg.seed, "traits")
    pc = {u: f"PC-{i:04d}" for i, u in enumerate(users)}
    http_rate = {u: traits_rng.uniform(*r["http_per_hour"]) for u in users}
    email_rate = {u: traits_rng.uniform(*r["email_per_hour"]) for u in users}
    device_user = {u: traits_rng.random() < r["device_user"] for u in users}

    writers = {
        "logon": _gen_logon(cfg, users, sessions, plans, pc, derive_rng(cfg.seed, "logon")),
        "device": _gen_device(cfg, users, sessions, plans, pc, device_user,
                              derive_rng(cfg.seed, "device")),
        "file": _gen_file(cfg, users, sessions, plans, pc, device_user,
                          derive_rng(cfg.seed, "file")),
        "http": _gen_http(cfg, users, sessions, plans, pc, http_rate, derive_rng(cfg.seed, "http")),
        "email": _gen_email(cfg, users, sessions, plans, pc, email_rate,
                            derive_rng(cfg.seed, "email")),
    }
    for kind, w in writers.items():
        w.write(out / f"{kind}.csv")

    with open(out / "roles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "role"])
        for u in users:
            w.writerow([u, roles[u]])

    insiders = {}
    for user, (scenario, hours) in sorted(plans.items()):
        times = [_at(d, h) for d, h in hours]
        insiders[user] = Insider(scenario, min(times), max(times) + timedelta(minutes=5))
    with open(out / "insiders.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "scenario", "start", "end"])
        for user, ins in insiders.items():
            w.writerow([user, ins.scenario, ins.start.strftime(DATE_FORMAT),
                        ins.end.strftime(DATE_FORMAT)])

    files = sorted(p.name for p in out.glob("*.csv"))
    digests = {name: hashlib.sha256((out / name).read_bytes()).hexdigest() for name in files}
    with open(out / "manifest.json", "w") as fh:
        json.dump({"config": cfg.to_dict(), "seed": cfg.seed, "files": digests}, fh,
                  indent=1, sort_keys=True)
        fh.write("\n")
    log.info("wrote synthetic logs for %d users (%d insiders) to %s",
             cfg.n_users, len(insiders), os.fspath(out))
    return GroundTruth(insiders)


# --- per-log generators -----------------------------------------------------

def _injections(plans, scenario_set):
    for user, (scenario, hours) in plans.items():
        if scenario in scenario_set:
            for day, hour in hours:
                yield user, scenario, day, hour


def _gen_logon(cfg, users, sessions, plans, pc, rng):
    w = _Writer("logon", "L")
    others = [pc[u] for u in users]
    for u in users:
        for day, on, off in sessions[u]:
            w.add(_at(day, on), u, pc[u], "Logon")
            w.add(_at(day, off), u, pc[u], "Logoff")
            if rng.random() < cfg.rates["remote_logon_session"]:
                t = rng.uniform(on, off - 0.5)
                for host in rng.choice(others, size=int(rng.integers(1, 5)), replace=False):
                    w.add(_at(day, t), u, str(host), "Logon")
                    w.add(_at(day, t + 0.01), u, str(host), "Logoff")
                    t += rng.uniform(0.02, 0.1)
    for user, scen, day, hour in _injections(plans, {"s1", "s3"}):
        if scen == "s1":
            w.add(_at(day, hour), user, pc[user], "Logon")
            w.add(_at(day, hour + rng.uniform(0.3, 1.0)), user, pc[user], "Logoff")
        else:
            n = int(rng.integers(2, 7))
            for j, host in enumerate(rng.choice(others, size=n, replace=False)):
                t = hour + j * rng.uniform(0.02, 0.1)
                w.add(_at(day, t), user, str(host), "Logon")
                w.add(_at(day, t + 0.01), user, str(host), "Logoff")
    return w


def _gen_device(cfg, users, sessions, plans, pc, device_user, rng):
    r = cfg.rates
    w = _Writer("device", "D")
    for u in users:
        if not device_user[u]:
            continue
        for day, on, off in sessions[u]:
            if rng.random() < r["device_day"]:
                t = rng.uniform(on, off)
                w.add(_at(day, t), u, pc[u], "Connect")
                w.add(_at(day, min(off, t + rng.uniform(0.1, 1.0))), u, pc[u], "Disconnect")
    for user, scen, day, hour in _injections(plans, {"s1", "s2", "s3"}):
        if scen == "s3" and rng.random() < 0.5:
            continue
        w.add(_at(day, hour + 0.05), user, pc[user], "Connect")
        w.add(_at(day, hour + 0.3), user, pc[user], "Disconnect")
    return w


def _filename(rng, p_sensitive):
    ext = rng.choice(SENSITIVE_EXT if rng.random() < p_sensitive else PLAIN_EXT)
    return f"{int(rng.integers(10**6)):06d}{ext}"


def _gen_file(cfg, users, sessions, plans, pc, device_user, rng):
    r = cfg.rates
    w = _Writer("file", "F")
    for u in users:
        if not device_user[u]:
            continue
        for day, on, off in sessions[u]:
            if rng.random() < r["device_day"]:
                for _ in range(int(rng.poisson(r["files_per_copy_day"]))):
                    w.add(_at(day, rng.uniform(on, off)), u, pc[u],
                          _filename(rng, r["sensitive_file"]))
            if rng.random() < r["bulk_copy_day"]:
                t = rng.uniform(on, off - 0.3)
                for _ in range(int(rng.integers(4, 16))):
                    w.add(_at(day, t + rng.uniform(0.0, 0.25)), u, pc[u], _filename(rng, 0.5))
    for user, scen, day, hour in _injections(plans, {"s1", "s2"}):
        n = int(rng.integers(3, 13)) if scen == "s2" else int(rng.integers(1, 5))
        for _ in range(n):
            w.add(_at(day, hour + rng.uniform(0.06, 0.29)), user, pc[user], _filename(rng, 0.7))
    return w


def _gen_http(cfg, users, sessions, plans, pc, http_rate, rng):
    r = cfg.rates
    w = _Writer("http", "H")

    def benign():
        if rng.random() < r["jobsite_http"]:
            return f"http://{rng.choice(JOB_SITES)}/search"
        return f"http://{rng.choice(BENIGN_SITES)}/{int(rng.integers(1000))}"

    for u in users:
        for day, on, off in sessions[u]:
            for _ in range(int(rng.poisson(http_rate[u] * (off - on)))):
                w.add(_at(day, rng.uniform(on, off)), u, pc[u], benign())
            if rng.random() < r["evening_session"]:
                s = rng.uniform(18.0, 21.0)
                for _ in range(int(rng.integers(1, 6))):
                    w.add(_at(day, s + rng.uniform(0, 0.5)), u, pc[u], benign())
            if rng.random() < r["jobsite_day"]:
                t = rng.uniform(on, off - 0.3)
                for _ in range(int(rng.integers(1, 4))):
                    w.add(_at(day, t + rng.uniform(0, 0.3)), u, pc[u],
                          f"http://{rng.choice(JOB_SITES)}/{int(rng.integers(1000))}")
    for user, scen, day, hour in _injections(plans, {"s1", "s2"}):
        sites = LEAK_SITES if scen == "s1" else JOB_SITES
        for _ in range(int(rng.integers(2, 7)) if scen == "s1" else int(rng.integers(1, 6))):
            w.add(_at(day, hour + rng.uniform(0.0, 0.3)), user, pc[user],
                  f"http://{rng.choice(sites)}/{int(rng.integers(1000))}")
    return w


def _gen_email(cfg, users, sessions, plans, pc, email_rate, rng):
    r = cfg.rates
    w = _Writer("email", "E")

    def internal():
        return f"{users[int(rng.integers(len(users)))]}@dtaa.com"

    def external():
        return f"x{int(rng.integers(10**5))}@{rng.choice(EXTERNAL_DOMAINS)}"

    for u in users:
        for day, on, off in sessions[u]:
            for _ in range(int(rng.poisson(email_rate[u] * (off - on)))):
                to = [internal() for _ in range(int(rng.integers(1, 4)))]
                if rng.random() < r["external_recipient"]:
                    to.append(external())
                cc = [internal()] if rng.random() < r["cc"] else []
                bcc = [internal()] if rng.random() < r["bcc"] else []
                att = int(rng.poisson(r["attachments"]))
                w.add(_at(day, rng.uniform(on, off)), u, pc[u], ";".join(to), ";".join(cc),
                      ";".join(bcc), f"{u}@dtaa.com", int(rng.integers(2000, 60000)), att)
    for user, scen, day, hour in _injections(plans, {"s4"}):
        for _ in range(int(rng.integers(2, 6))):
            w.add(_at(day, hour + rng.uniform(0.0, 0.3)), user, pc[user], external(), "",
                  external(), f"{user}@dtaa.com", int(rng.integers(200000, 2000000)),
                  int(rng.integers(1, 5)))
    return w
