"""Deterministic synthetic cluster logs with injected failures.

Every random draw comes from a named ``random.Random`` stream derived from the
scenario seed, so the normal workload of one node does not shift when another
node fails or when interference parameters change.
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta
from typing import Iterable, Sequence

from .ingest import ANOMALOUS, NORMAL, LogRecord, LogWindow, window, window_labels

ROLES = ("master", "worker", "name-node", "data-node")
KINDS = ("compute-node", "storage-node", "interference", "combined")
GOOD, BAD = "good", "bad"
EPOCH = datetime(2021, 3, 1)


class SpecError(ValueError):
    """An invalid scenario; ``field`` names the offending spec field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _stream(seed: int, name: str) -> random.Random:
    return random.Random(f"{seed}/{name}")


# --------------------------------------------------------------------------
# Gilbert-Elliott channel


@dataclass(frozen=True)
class GilbertElliottParams:
    p: float = 0.15  # good -> bad
    r: float = 0.02  # bad -> good
    e_good: float = 0.01  # 1 - k
    e_bad: float = 0.30  # 1 - h

    def __post_init__(self) -> None:
        for name in ("p", "r", "e_good", "e_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(f"ge_params.{name}", f"{v} is not in [0, 1]")

    @property
    def bad_fraction(self) -> float:
        """Stationary probability of the bad state."""
        if self.p + self.r == 0:
            return 0.0
        return self.p / (self.p + self.r)

    @property
    def error_rate(self) -> float:
        b = self.bad_fraction
        return (1 - b) * self.e_good + b * self.e_bad


def ge_step(state: str, params: GilbertElliottParams, rng: random.Random) -> tuple[str, bool]:
    """Advance the channel one step.

    The error flag uses the rate of the state held during the step; the
    transition is drawn afterwards. Exactly two uniforms are consumed per step
    so that runs with different error rates stay aligned on one stream.
    """
    u_err = rng.random()
    u_move = rng.random()
    if state == GOOD:
        error = u_err < params.e_good
        return (BAD if u_move < params.p else GOOD), error
    error = u_err < params.e_bad
    return (GOOD if u_move < params.r else BAD), error


def ge_simulate(params: GilbertElliottParams, steps: int, seed: int = 0, state: str = GOOD) -> tuple[float, float]:
    """Fraction of steps spent in the bad state and fraction with an error."""
    rng = _stream(seed, "ge")
    bad = errors = 0
    for _ in range(steps):
        bad += state == BAD
        state, err = ge_step(state, params, rng)
        errors += err
    return bad / steps, errors / steps


# --------------------------------------------------------------------------
# Scenario description


@dataclass(frozen=True)
class Node:
    role: str
    id: str
    host: str = ""

    def __post_init__(self) -> None:
        if not self.host:
            object.__setattr__(self, "host", self.id)


@dataclass(frozen=True)
class StageProfile:
    """Size and timing of the injected failure stages (seconds of virtual time)."""

    s1_records: int = 14
    s1_seconds: float = 2.0
    s2_seconds: float = 8.0
    s3_attempts: int = 8
    s3_seconds: float = 4.0
    s4_records: int = 5
    s4_seconds: float = 2.0
    peer_delay: float = 25.0
    peer_records: int = 7
    peer_seconds: float = 2.0
    timeout_delay: float = 20.0
    retry_backoff: float = 5.0
    # minimum spacing between queued retries on a degraded link
    drain_gap: float = 1.0


@dataclass(frozen=True)
class FailureSpec:
    kind: str
    target: str
    onset: float
    ge_params: GilbertElliottParams | None = None
    stages: StageProfile = StageProfile()


@dataclass(frozen=True)
class WorkloadProfile:
    """Events per second for each role."""

    master: float = 3.0
    worker: float = 2.0
    name_node: float = 1.5
    data_node: float = 2.0

    def rate(self, role: str) -> float:
        return getattr(self, role.replace("-", "_"))


def default_roster() -> tuple[Node, ...]:
    """One master/name-node machine and three worker/data-node machines."""
    nodes = [Node("master", "master", "node1"), Node("name-node", "namenode", "node1")]
    for i in (2, 3, 4):
        nodes.append(Node("worker", f"worker-{i}", f"node{i}"))
        nodes.append(Node("data-node", f"datanode-{i}", f"node{i}"))
    return tuple(nodes)


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    duration: float = 200.0
    nodes: tuple[Node, ...] = field(default_factory=default_roster)
    workload: WorkloadProfile = WorkloadProfile()
    failure: FailureSpec | None = None

    def by_role(self, role: str) -> list[Node]:
        return [n for n in self.nodes if n.role == role]

    def node(self, node_id: str) -> Node | None:
        return next((n for n in self.nodes if n.id == node_id), None)

    def validate(self) -> None:
        if not self.duration > 0:
            raise SpecError("duration", "must be positive")
        if not self.nodes:
            raise SpecError("nodes", "roster is empty")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise SpecError("nodes", "node ids must be unique")
        for n in self.nodes:
            if n.role not in ROLES:
                raise SpecError("nodes.role", f"unknown role {n.role!r}")
        f = self.failure
        if f is None:
            return
        if f.kind not in KINDS:
            raise SpecError("failure.kind", f"unknown failure kind {f.kind!r}")
        if not 0 <= f.onset <= self.duration:
            raise SpecError("failure.onset", f"{f.onset} lies outside the run duration")
        compute = f.kind in ("compute-node", "combined")
        storage = f.kind in ("storage-node", "combined")
        if compute and not (self.by_role("master") and self.by_role("worker")):
            raise SpecError("nodes", "compute failures need a master and a worker")
        if storage and (not self.by_role("name-node") or len(self.by_role("data-node")) < 2):
            raise SpecError("nodes", "storage failures need a name-node and two data-nodes")
        if f.kind == "combined":
            roles = {n.role for n in self.nodes if n.host == f.target}
            if not {"worker", "data-node"} <= roles:
                raise SpecError("failure.target", f"host {f.target!r} must run a worker and a data-node")
        elif f.kind == "interference":
            if not self.node(f.target) and not any(n.host == f.target for n in self.nodes):
                raise SpecError("failure.target", f"{f.target!r} is neither a node nor a host in the roster")
        else:
            target = self.node(f.target)
            want = {"compute-node": "worker", "storage-node": "data-node"}.get(f.kind)
            if target is None or (want and target.role != want):
                raise SpecError("failure.target", f"{f.target!r} is not a {want or 'node'} in the roster")
        if f.kind == "interference" and f.ge_params is None:
            raise SpecError("failure.ge_params", "interference needs Gilbert-Elliott parameters")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> ScenarioSpec:
        try:
            nodes = tuple(Node(**n) for n in doc["nodes"]) if "nodes" in doc else default_roster()
        except TypeError as exc:
            raise SpecError("nodes", str(exc)) from None
        failure = None
        if doc.get("failure"):
            fd = dict(doc["failure"])
            try:
                ge = GilbertElliottParams(**fd.pop("ge_params")) if fd.get("ge_params") else None
                fd.pop("ge_params", None)
                stages = StageProfile(**fd.pop("stages", {}))
                failure = FailureSpec(ge_params=ge, stages=stages, **fd)
            except TypeError as exc:
                raise SpecError("failure", str(exc)) from None
        try:
            workload = WorkloadProfile(**doc.get("workload", {}))
        except TypeError as exc:
            raise SpecError("workload", str(exc)) from None
        unknown = set(doc) - {"seed", "duration", "nodes", "workload", "failure"}
        if unknown:
            raise SpecError(sorted(unknown)[0], "unknown field")
        spec = cls(int(doc.get("seed", 0)), float(doc.get("duration", 200.0)), nodes, workload, failure)
        spec.validate()
        return spec


# --------------------------------------------------------------------------
# Templates

# (name, weight, is_communication, text)
MASTER_POOL = [
    ("m_launch", 3, False, "launching task {part}.0 of stage {stage} as TID {tid} on {host}, executor {exec}, {bytes} bytes, locality PROCESS_LOCAL"),
    ("m_done", 3, False, "task {part}.0 of stage {stage} (TID {tid}) completed on {host} by executor {exec} after {ms} ms, {i} of {m} done"),
    ("m_block", 2, True, "cached {rdd} in memory of {ip}:{port}, size {kb} KB, {mb} MB left"),
    ("m_submit", 1, False, "stage {stage} submitted with {n} pending tasks from job {job}"),
    ("m_stage", 1, False, "stage {stage} of job {job} completed in {sec} s"),
    ("m_hb", 1, True, "heartbeat received from executor {exec} on {host}"),
    ("m_bcast", 1, False, "dropped broadcast_{n}_piece0 from memory of {ip}:{port}, {kb} KB freed"),
]
WORKER_POOL = [
    ("w_assign", 3, False, "executor {exec} accepted TID {tid}"),
    ("w_run", 3, False, "executor {exec} running task {part}.0 of stage {stage} (TID {tid})"),
    ("w_done", 3, False, "task {part}.0 of stage {stage} (TID {tid}) finished, {bytes} bytes returned to driver"),
    ("w_store", 2, False, "stored {rdd} in memory, estimated {kb} KB, {mb} MB still free"),
    ("w_fetchplan", 2, True, "shuffle read needs {n} of {m} blocks from remote executors"),
    ("w_fetch", 2, True, "issued {n} remote block fetches, first reply after {ms} ms"),
    ("w_bcast", 1, False, "broadcast variable {n} loaded in {ms} ms"),
    ("w_compute", 1, False, "partition {rdd} missing from cache, recomputing"),
]
NAMENODE_POOL = [
    ("n_alloc", 2, False, "new block blk_{blk}_{gen} for {path} placed on {ip}:{port} {ip}:{port} {ip}:{port}"),
    ("n_stored", 3, False, "block map now lists blk_{blk}_{gen} on {ip}:{port}, {bytes} bytes"),
    ("n_close", 1, False, "client DFSClient_{cid} closed {path}"),
    ("n_hb", 2, True, "datanode {ip}:{port} reported {n} blocks in heartbeat"),
    ("n_edit", 1, False, "edit log synced {n} transactions in {ms} ms"),
    ("n_lease", 1, False, "lease on {path} renewed for DFSClient_{cid}"),
]
DATANODE_POOL = [
    ("d_recv", 3, True, "receiving blk_{blk}_{gen} from /{ip}:{port} into /{ip}:{port}"),
    ("d_got", 2, True, "received blk_{blk}_{gen} of {bytes} bytes from /{ip}:{port}"),
    ("d_ack", 2, False, "pipeline ack for blk_{blk}_{gen} done, downstream healthy"),
    ("d_serve", 2, True, "sent blk_{blk}_{gen} to /{ip} in {ms} ms, {bytes} bytes"),
    ("d_scan", 1, False, "scanner checked blk_{blk}_{gen}, checksum ok"),
    ("d_hb", 1, True, "namenode {ip}:{port} answered heartbeat in {ms} ms"),
    ("d_del", 0.5, False, "removing blk_{blk}_{gen} replica file {path}"),
]
POOLS = {"master": MASTER_POOL, "worker": WORKER_POOL, "name-node": NAMENODE_POOL, "data-node": DATANODE_POOL}

COMPUTE_S1_HEAD = [
    ("c_disassoc", "worker {worker} at {ip}:{port} disassociated from the cluster manager"),
    ("c_lost", "executor {exec} on {host} declared lost: silent for {ms} ms, limit {limit} ms"),
]
COMPUTE_S1_TASK = ("c_task", "TID {tid} ({part}.0 of stage {stage}) lost with executor {exec} on {host}")
COMPUTE_S1_TAIL = [
    ("c_bm", "block manager of executor {exec} dropped from the block map"),
    ("c_mark", "stage {stage} keeps {n} tasks of lost executor {exec} queued for resubmission"),
]
COMPUTE_S3 = [
    ("c_retry", "reconnect attempt {a} of {m} to worker {worker} at {ip}:{port}"),
    ("c_refused", "attempt {a}: {ip}:{port} refused the connection, waiting {ms} ms"),
]
COMPUTE_S4 = [
    ("c_giveup", "gave up on worker {worker} after {m} reconnect attempts"),
    ("c_resubmit", "moving {n} tasks of stage {stage} from executor {exec} to healthy executors"),
    ("c_release", "freed cores and memory reserved for executor {exec}"),
    ("c_remove", "worker {worker} taken out of the active worker list"),
    ("c_resume", "scheduler resumed normal task placement with {n} executors"),
]
STORAGE_S1_HEAD = [
    ("s_dead", "datanode {ip}:{port} silent for {sec} s, now considered dead"),
    ("s_drop", "dropping {n} replicas of dead datanode {ip}:{port} from the block map"),
]
STORAGE_S1_BLOCK = ("s_under", "blk_{blk}_{gen} has {live} live replicas, {want} required")
STORAGE_S3 = [
    ("s_copy", "replication round {a}: copy blk_{blk}_{gen} from {ip}:{port} to {ip}:{port}"),
    ("s_short", "replication round {a}: {n} blocks still under target"),
]
STORAGE_S4 = [
    ("s_cleared", "replication backlog cleared, {n} blocks back at target"),
    ("s_topo", "datanode {ip}:{port} removed from network topology"),
    ("s_quota", "space accounting rebuilt without datanode {ip}:{port}"),
    ("s_safe", "block report round finished with {n} blocks verified"),
    ("s_resume", "placement policy back to {n} live datanodes"),
]
STORAGE_PEER = [
    ("p_mirror", "write pipeline to mirror {ip}:{port} broke while receiving blk_{blk}_{gen}"),
    ("p_xfer", "transfer worker for blk_{blk}_{gen} failed: peer {ip}:{port} unreachable"),
    ("p_slow", "mirror {ip}:{port} took {ms} ms to accept one packet"),
    ("p_recover", "rebuilding pipeline of blk_{blk}_{gen} without node {ip}:{port}"),
]
DEGRADE_TIMEOUT = ("g_timeout", "fetch of {n} blocks from {host} timed out after {ms} ms")
DEGRADE_RETRY = ("g_retry", "fetch retry {a} of {m} to {host} for {n} pending blocks")
DEGRADE_ESCALATE = ("g_escalate", "TID {tid} ({part}.0 of stage {stage}) resubmitted, executor on {host} too slow")

OPENSTACK_NORMAL = [
    "instance {uuid}: scheduling request accepted for flavor {flavor}",
    "instance {uuid}: reserving {mb} MB memory, {gb} GB disk, {vcpu} vcpus on {host}",
    "instance {uuid}: reservation granted",
    "instance {uuid}: preparing root disk from image {image}",
    "instance {uuid}: guest started, state running",
    "instance {uuid}: spawn finished in {sec} s",
]
OPENSTACK_OPTIONAL = [
    "instance {uuid}: volume {vol} attached as vdb",
    "instance {uuid}: soft reboot requested by owner",
    "instance {uuid}: guest back online after reboot",
]
OPENSTACK_TEARDOWN = [
    "instance {uuid}: stop requested by owner",
    "instance {uuid}: guest shut down, releasing resources",
    "instance {uuid}: removed disk files under {path}",
    "instance {uuid}: teardown finished in {sec} s",
]
OPENSTACK_RARE = [
    "instance {uuid}: live migration towards {host} started",
    "instance {uuid}: live migration copied {pct} percent of memory",
    "instance {uuid}: live migration towards {host} finished in {sec} s",
]
OPENSTACK_ANOMALY = [
    "instance {uuid}: image download from {ip} stalled after {bytes} bytes",
    "instance {uuid}: spawn aborted, hypervisor returned code {code}",
    "instance {uuid}: no host left after {m} attempts",
    "instance {uuid}: state forced to ERROR",
]

FAILURE_TEMPLATES = {
    name
    for group in (COMPUTE_S1_HEAD, COMPUTE_S1_TAIL, COMPUTE_S3, COMPUTE_S4, STORAGE_S1_HEAD,
                  STORAGE_S3, STORAGE_S4, STORAGE_PEER)
    for name, _ in group
} | {COMPUTE_S1_TASK[0], STORAGE_S1_BLOCK[0], DEGRADE_TIMEOUT[0], DEGRADE_RETRY[0],
     DEGRADE_ESCALATE[0], "os_anomaly"}

class _Filler:
    """Draws values for template fields."""

    def __init__(self, rng: random.Random, spec: ScenarioSpec):
        self.rng = rng
        self.hosts = sorted({n.host for n in spec.nodes})
        self.ips = {h: f"10.0.0.{11 + i}" for i, h in enumerate(self.hosts)}
        self.workers = [n for n in spec.nodes if n.role == "worker"] or list(spec.nodes)

    def ip(self, host: str | None = None) -> str:
        return self.ips[host] if host else self.ips[self.rng.choice(self.hosts)]

    def values(self, overrides: dict | None = None) -> dict:
        r = self.rng.randint
        w = self.rng.choice(self.workers)
        vals = {
            "part": r(0, 199), "stage": r(0, 40), "tid": r(1, 20000), "exec": r(1, 12),
            "host": w.host, "worker": w.id, "bytes": r(900, 250000), "ms": r(1, 4000),
            "i": r(1, 200), "m": r(3, 8), "n": r(1, 64), "job": r(0, 20),
            "sec": f"{self.rng.uniform(0.05, 90):.3f}", "kb": f"{self.rng.uniform(0.5, 900):.1f}",
            "mb": f"{self.rng.uniform(100, 9000):.1f}", "rdd": f"rdd_{r(1, 90)}_{r(0, 199)}",
            "ip": self.ip(), "port": r(30000, 60999), "blk": r(1073741825, 1073799999),
            "gen": r(1001, 9999), "path": f"/user/spark/out/part-{r(0, 99999):05d}",
            "cid": f"NONMAPREDUCE_{r(10000, 99999)}_{r(1, 9)}", "limit": 120000,
            "a": r(1, 5), "live": r(1, 2), "want": 3,
        }
        if overrides:
            vals.update(overrides)
        return vals


def _fill(template: str, vals: dict) -> str:
    return template.format(**vals)


@dataclass
class _Event:
    ts: float
    node: str
    msg: str
    template: str
    level: str = "INFO"
    session: str | None = None
    anomalous: bool = False
    comm: bool = False


@dataclass(frozen=True)
class TruthRegion:
    start: int
    end: int
    stage: str
    injection: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LabeledCorpus:
    records: list[LogRecord]
    truth_regions: list[TruthRegion]
    templates: list[str] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        return b"".join(r.raw.encode() + b"\n" for r in self.records)

    def truth_json(self) -> bytes:
        return (json.dumps([t.to_dict() for t in self.truth_regions], indent=1) + "\n").encode()

    def windows(self, target_bytes: int = 4096) -> list[LogWindow]:
        return list(window(self.records, target_bytes))

    def window_labels(self, target_bytes: int = 4096) -> list[bool]:
        return window_labels(self.windows(target_bytes))

    def truth_windows(self, target_bytes: int = 4096) -> list[tuple[int, int]]:
        """Truth regions as window-index ranges, overlapping or touching ones merged."""
        return truth_windows(self.truth_regions, self.windows(target_bytes))

    @property
    def n_bytes(self) -> int:
        return self.records[-1].end if self.records else 0


def truth_windows(regions: Iterable[TruthRegion], windows: Sequence[LogWindow]) -> list[tuple[int, int]]:
    spans = []
    for reg in regions:
        hit = [w.index for w in windows if w.span[0] < reg.end and reg.start < w.span[1]]
        if hit:
            spans.append((hit[0], hit[-1]))
    merged: list[tuple[int, int]] = []
    for a, b in sorted(spans):
        if merged and a <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
        else:
            merged.append((a, b))
    return merged


def _timestamp(t: float) -> str:
    return (EPOCH + timedelta(seconds=t)).isoformat(timespec="milliseconds")


def _serialize(events: Sequence[_Event]) -> tuple[list[LogRecord], list[str]]:
    records, names = [], []
    offset = 0
    for ev in events:
        doc = {"ts": _timestamp(ev.ts), "node": ev.node, "level": ev.level, "msg": ev.msg}
        if ev.session is not None:
            doc["session"] = ev.session
        doc["label"] = ANOMALOUS if ev.anomalous else NORMAL
        raw = json.dumps(doc, separators=(",", ":"))
        end = offset + len(raw.encode()) + 1
        records.append(
            LogRecord(offset, raw, ev.node, ev.session, doc["label"], end=end, msg=ev.msg)
        )
        names.append(ev.template)
        offset = end
    return records, names


# --------------------------------------------------------------------------
# Cluster scenarios


def _normal_events(spec: ScenarioSpec, dead_at: dict[str, float]) -> list[_Event]:
    events = []
    for node in spec.nodes:
        rng = _stream(spec.seed, f"workload/{node.id}")
        filler = _Filler(rng, spec)
        pool = POOLS[node.role]
        weights = [w for _, w, _, _ in pool]
        rate = spec.workload.rate(node.role)
        stop = min(spec.duration, dead_at.get(node.id, spec.duration))
        t = rng.expovariate(rate) if rate > 0 else stop
        while t < stop:
            name, _, comm, text = rng.choices(pool, weights)[0]
            msg = _fill(text, filler.values({"host": node.host} if node.role == "data-node" else None))
            events.append(_Event(t, node.id, msg, name, comm=comm))
            t += rng.expovariate(rate)
    return events


def _spread(t0: float, seconds: float, count: int) -> list[float]:
    if count <= 1:
        return [t0] * count
    step = seconds / count
    return [t0 + i * step for i in range(count)]


def _inject_stages(
    spec: ScenarioSpec, injection: str, reporter: Node, victim: Node, victim_hosts: set[str],
    stages: list[tuple[str, list[tuple[str, str]]]], prof: StageProfile,
) -> tuple[list[_Event], list[tuple[str, str, float, float]]]:
    """Emit S1..S4 on ``reporter`` about ``victim``; return events and stage windows."""
    rng = _stream(spec.seed, f"inject/{injection}")
    filler = _Filler(rng, spec)
    victim_ip = filler.ip(victim.host)
    fixed = {"worker": victim.id, "host": victim.host, "ip": victim_ip,
             "exec": rng.randint(1, 12), "stage": rng.randint(0, 40)}
    assert spec.failure is not None
    t = spec.failure.onset
    bounds = []
    events = []
    durations = {"S1": prof.s1_seconds, "S2": prof.s2_seconds, "S3": prof.s3_seconds, "S4": prof.s4_seconds}
    for stage, templates in stages:
        start, stop = t, t + durations[stage]
        bounds.append((injection, stage, start, stop))
        for ts, (name, text, extra) in zip(_spread(start, stop - start, len(templates)), templates):
            vals = filler.values(fixed)
            vals["ip"] = victim_ip
            vals.update(extra)
            # other endpoints of copy/replication messages are healthy hosts
            if text.count("{ip}") > 1:
                healthy = [h for h in filler.hosts if h not in victim_hosts] or filler.hosts
                first, *rest = text.split("{ip}")
                msg = first + victim_ip + "".join(filler.ip(rng.choice(healthy)) + part for part in rest)
                msg = _fill(msg, vals)
            else:
                msg = _fill(text, vals)
            events.append(_Event(ts, reporter.id, msg, name, "WARN", anomalous=True))
        t = stop
    return events, bounds


def _compute_stages(prof: StageProfile, rng: random.Random) -> list[tuple[str, list]]:
    s1 = [(n, t, {}) for n, t in COMPUTE_S1_HEAD]
    n_tasks = max(0, prof.s1_records - len(COMPUTE_S1_HEAD) - len(COMPUTE_S1_TAIL))
    s1 += [(COMPUTE_S1_TASK[0], COMPUTE_S1_TASK[1], {}) for _ in range(n_tasks)]
    s1 += [(n, t, {}) for n, t in COMPUTE_S1_TAIL]
    s3 = []
    for a in range(1, prof.s3_attempts + 1):
        for n, t in COMPUTE_S3:
            s3.append((n, t, {"a": a, "m": prof.s3_attempts}))
    s4 = [(n, t, {"m": prof.s3_attempts}) for n, t in COMPUTE_S4[: prof.s4_records]]
    return [("S1", s1), ("S2", []), ("S3", s3), ("S4", s4)]


def _storage_stages(prof: StageProfile, rng: random.Random) -> list[tuple[str, list]]:
    s1 = [(n, t, {}) for n, t in STORAGE_S1_HEAD]
    s1 += [(STORAGE_S1_BLOCK[0], STORAGE_S1_BLOCK[1], {}) for _ in range(max(0, prof.s1_records - 2))]
    s3 = []
    for a in range(1, prof.s3_attempts + 1):
        for n, t in STORAGE_S3:
            s3.append((n, t, {"a": a}))
    s4 = [(n, t, {}) for n, t in STORAGE_S4[: prof.s4_records]]
    return [("S1", s1), ("S2", []), ("S3", s3), ("S4", s4)]


def _peer_events(spec: ScenarioSpec, victim: Node, dead: set[str], start: float) -> tuple[list[_Event], tuple]:
    prof = spec.failure.stages  # type: ignore[union-attr]
    rng = _stream(spec.seed, "inject/peer")
    filler = _Filler(rng, spec)
    peers = [n for n in spec.by_role("data-node") if n.id not in dead]
    events = []
    times = _spread(start, prof.peer_seconds, prof.peer_records * len(peers))
    k = 0
    for i in range(prof.peer_records):
        for peer in peers:
            name, text = STORAGE_PEER[i % len(STORAGE_PEER)]
            vals = filler.values({"ip": filler.ip(victim.host)})
            events.append(_Event(times[k], peer.id, _fill(text, vals), name, "ERROR", anomalous=True))
            k += 1
    return events, ("storage", "peer", start, start + prof.peer_seconds)


def _interference_events(spec: ScenarioSpec, normal: list[_Event]) -> list[_Event]:
    f = spec.failure
    assert f is not None and f.ge_params is not None
    prof = f.stages
    # the target is one node or every node on a host
    node = spec.node(f.target)
    targets = [node] if node else [n for n in spec.nodes if n.host == f.target]
    ids = {n.id for n in targets}
    host = targets[0].host
    reporters = [n for n in spec.by_role("master") + spec.by_role("name-node") if n.id not in ids]
    reporter = reporters[0] if reporters else targets[0]
    channel = _stream(spec.seed, "ge")
    filler = _Filler(_stream(spec.seed, "degrade"), spec)
    comm = [e for e in normal if e.node in ids and e.comm and e.ts >= f.onset]
    state = GOOD
    backlog = float("-inf")
    history: list[bool] = []
    out = []
    for ev in comm:
        state, err = ge_step(state, f.ge_params, channel)
        # fields are drawn for every event so streams stay aligned across error rates
        vals = filler.values({"host": host, "m": 3})
        history.append(err)
        if not err:
            continue
        # retries queue behind each other on the degraded link, so the log
        # falls further behind as errors accumulate
        t = max(ev.ts + prof.timeout_delay, backlog + prof.drain_gap)
        backlog = t + prof.retry_backoff
        out.append(_Event(t, reporter.id, _fill(DEGRADE_TIMEOUT[1], vals), DEGRADE_TIMEOUT[0], "WARN", anomalous=True))
        out.append(_Event(t + prof.retry_backoff, reporter.id, _fill(DEGRADE_RETRY[1], vals),
                          DEGRADE_RETRY[0], "WARN", anomalous=True))
        if len(history) >= 3 and all(history[-3:]):
            out.append(_Event(t + 2 * prof.retry_backoff, reporter.id, _fill(DEGRADE_ESCALATE[1], vals),
                              DEGRADE_ESCALATE[0], "ERROR", anomalous=True))
    return out


def generate(spec: ScenarioSpec) -> LabeledCorpus:
    """Build the merged multi-node log of ``spec`` with labels and truth regions."""
    spec.validate()
    f = spec.failure
    dead_at: dict[str, float] = {}
    victims: list[Node] = []
    if f is not None and f.kind != "interference":
        if f.kind == "combined":
            victims = [n for n in spec.nodes if n.host == f.target and n.role in ("worker", "data-node")]
        else:
            victims = [spec.node(f.target)]  # type: ignore[list-item]
        for v in victims:
            dead_at[v.id] = f.onset

    events = _normal_events(spec, dead_at)
    bounds: list[tuple[str, str, float, float]] = []
    per_record = False
    if f is not None:
        rng = _stream(spec.seed, "stages")
        hosts = {v.host for v in victims}
        for v in victims:
            if v.role == "worker":
                evs, b = _inject_stages(spec, "compute", spec.by_role("master")[0], v, hosts,
                                        _compute_stages(f.stages, rng), f.stages)
            else:
                evs, b = _inject_stages(spec, "storage", spec.by_role("name-node")[0], v, hosts,
                                        _storage_stages(f.stages, rng), f.stages)
                peer_start = b[-1][3] + f.stages.peer_delay
                pevs, pb = _peer_events(spec, v, set(dead_at), peer_start)
                evs += pevs
                b.append(pb)
            events += evs
            bounds += b
        if f.kind == "interference":
            events += _interference_events(spec, events)
            per_record = True

    events.sort(key=lambda e: e.ts)
    records, names = _serialize(events)
    regions: list[TruthRegion] = []
    if per_record:
        regions = [TruthRegion(r.offset, r.end, "degradation", "interference")
                   for r in records if r.anomalous]
    for injection, stage, start, stop in bounds:
        inside = [r for r, ev in zip(records, events) if start <= ev.ts < stop]
        if inside:
            regions.append(TruthRegion(inside[0].offset, inside[-1].end, stage, injection))
    regions.sort(key=lambda t: (t.start, t.end))
    return LabeledCorpus(records, regions, names)


def baseline(spec: ScenarioSpec, seed: int | None = None) -> ScenarioSpec:
    """The same cluster without a failure, optionally under another seed."""
    return replace(spec, failure=None, seed=spec.seed if seed is None else seed)


def default_scenario(seed: int = 0, kind: str = "compute-node", duration: float = 200.0, **ge) -> ScenarioSpec:
    """A default-roster scenario with one failure of ``kind`` at 45% of the run.

    Interference starts earlier, at 30%, and degrades every link of ``node4``.
    """
    onset = 0.45 * duration
    target = {"compute-node": "worker-4", "storage-node": "datanode-4",
              "combined": "node4", "interference": "node4"}[kind]
    params = GilbertElliottParams(**ge) if kind == "interference" else None
    if kind == "interference":
        onset = 0.3 * duration
    return ScenarioSpec(seed, duration, failure=FailureSpec(kind, target, onset, params))


# --------------------------------------------------------------------------
# OpenStack-shaped case study


def _uuid(rng: random.Random) -> str:
    h = f"{rng.getrandbits(128):032x}"
    return f"{h[:8]}-{h[8:12]}-{h[12:16]}-{h[16:20]}-{h[20:]}"


class _SessionMaker:
    def __init__(self, rng: random.Random, optional_p: float = 0.5, rare_lines: int = 3):
        self.rng = rng
        self.optional_p = optional_p
        self.rare_lines = rare_lines
        self.hosts = [f"cmp-{i:02d}" for i in range(1, 9)]
        self.t = 0.0

    def _vals(self, uuid: str, a: int = 1) -> dict:
        r = self.rng.randint
        return {
            "uuid": uuid, "flavor": self.rng.choice(["m1.small", "m1.medium", "m1.large"]),
            "mb": self.rng.choice([2048, 4096, 8192]), "gb": self.rng.choice([20, 40, 80]),
            "vcpu": self.rng.choice([1, 2, 4]), "host": self.rng.choice(self.hosts),
            "image": _uuid(self.rng), "sec": f"{self.rng.uniform(0.5, 30):.2f}",
            "vol": _uuid(self.rng), "path": f"/var/lib/nova/instances/{uuid}",
            "pct": r(10, 99), "ip": f"10.1.{r(0, 9)}.{r(2, 250)}", "bytes": r(10000, 900000),
            "code": r(-38, -1), "a": a, "m": 3,
        }

    def session(self, kind: str) -> list[_Event]:
        uuid = _uuid(self.rng)
        host = self.rng.choice(self.hosts)
        if kind == "normal":
            lines = list(OPENSTACK_NORMAL)
            for extra in OPENSTACK_OPTIONAL:
                if self.rng.random() < self.optional_p:
                    lines.append(extra)
            lines += OPENSTACK_TEARDOWN
            name, anomalous, level = "os_normal", False, "INFO"
        elif kind == "rare":
            lines = OPENSTACK_NORMAL[:2] + OPENSTACK_RARE[: self.rare_lines]
            name, anomalous, level = "os_rare", False, "INFO"
        else:
            lines = OPENSTACK_NORMAL[:2] + OPENSTACK_ANOMALY
            name, anomalous, level = "os_anomaly", True, "ERROR"
        out = []
        attempt = 0
        for i, text in enumerate(lines):
            if "attempt" in text:
                attempt += 1
            self.t += self.rng.uniform(0.05, 1.5)
            bad = anomalous and i >= 2
            out.append(_Event(self.t, host, _fill(text, self._vals(uuid, attempt)),
                              name if bad or kind != "anomalous" else "os_normal",
                              level if bad else "INFO", uuid, bad))
        return out


def _sizes(evs: Sequence[_Event]) -> list[int]:
    return [_serialize([e])[0][0].size for e in evs]


def _spill(fill: int, sizes: Sequence[int], target_bytes: int) -> int | None:
    """Bytes of a session landing in the next window, or None if it fits."""
    spill = None
    for s in sizes:
        if spill is not None:
            spill += s
            continue
        fill += s
        if fill >= target_bytes:
            spill = 0
    return spill


def _openstack_events(
    seed: int, n_windows: int, target_bytes: int, anomalous: Sequence[int], rare: Sequence[int],
    rare_share: float = 0.0, rare_lines: int = 3,
) -> list[_Event]:
    maker = _SessionMaker(_stream(seed, "openstack"), rare_lines=rare_lines)
    mix = _stream(seed, "openstack/mix")
    events: list[_Event] = []
    w = fill = 0
    pending = {i: "anomalous" for i in anomalous} | {i: "rare" for i in rare}
    prepared: dict[int, list[_Event]] = {}

    def push(evs: list[_Event]) -> bool:
        nonlocal w, fill
        for ev, size in zip(evs, _sizes(evs)):
            events.append(ev)
            fill += size
            if fill >= target_bytes:
                w, fill = w + 1, 0
                if w == n_windows:
                    return False
        return True

    redraws = 0
    while w < n_windows:
        if w in pending:
            del pending[w]
            start = w
            if not push(prepared.pop(w)):
                break
            if w != start:
                raise RuntimeError(f"special session spilled out of window {start}")
        session = maker.session("rare" if mix.random() < rare_share else "normal")
        nxt = w + 1
        if nxt in pending:
            if nxt not in prepared:
                prepared[nxt] = maker.session(pending[nxt])
            # the special session must open window nxt and end inside it
            spill = _spill(fill, _sizes(session), target_bytes)
            if spill is not None and spill + sum(_sizes(prepared[nxt])) >= target_bytes:
                redraws += 1
                if redraws > 1000:
                    raise RuntimeError("cannot place special session; windows too small")
                continue
        if not push(session):
            break
    return events


def openstack_shape(
    seed: int = 7,
    n_windows: int = 52,
    target_bytes: int = 4096,
    anomalous: Sequence[int] = (24, 25, 26, 27),
    rare: Sequence[int] = (17,),
) -> LabeledCorpus:
    """VM-lifecycle sessions grouped by instance id, laid out so that exactly
    ``n_windows`` windows result, anomalous sessions sit at the start of the
    ``anomalous`` windows and a rare but normal session opens each ``rare``
    window."""
    events = _openstack_events(seed, n_windows, target_bytes, anomalous, rare)
    records, names = _serialize(events)
    regions = []
    sessions: dict[str, list[LogRecord]] = {}
    for rec, ev in zip(records, events):
        if ev.template == "os_anomaly":
            sessions.setdefault(rec.session, []).append(rec)  # type: ignore[arg-type]
    for recs in sessions.values():
        regions.append(TruthRegion(recs[0].offset, recs[-1].end, "anomalous-session", "openstack"))
    return LabeledCorpus(records, regions, names)


def openstack_baseline(
    seed: int = 7, n_windows: int = 104, target_bytes: int = 4096, rare_share: float = 0.03
) -> LabeledCorpus:
    """Normal sessions for training; a small share are the rare migration kind."""
    events = _openstack_events(seed + 1_000_003, n_windows, target_bytes, (), (), rare_share)
    records, names = _serialize(events)
    return LabeledCorpus(records, [], names)


# --------------------------------------------------------------------------
# Corpora for language-model experiments

_WORDS = (
    "the of and to in a is that for it as was with be by on not he i this are or his from at which "
    "but have an they you were her she there been one all we their has would when if so no will can "
    "more out up into do about time than other could them some these may then its first any like "
    "made over after also two did many before must through back where years much your way well down "
    "should because each just those people how too little state good very make world still own see "
    "men work long get here between both life being under never day same another know while last "
    "might us great old year off come since against go came right used take three"
).split()


def templated_corpus(seed: int = 0, n_records: int = 2000, n_templates: int = 20) -> list[list[str]]:
    """Tokenized log-like records drawn from ``n_templates`` fixed templates.

    Each template is a fixed word sequence with numeric slots; after masking
    every record of a template has the same token sequence.
    """
    from .ingest import mask

    rng = _stream(seed, "templated")
    vocab = rng.sample(_WORDS, 60)
    templates = []
    for _ in range(n_templates):
        words = rng.sample(vocab, rng.randint(5, 9))
        slots = rng.sample(range(1, len(words) + 1), 2)
        for s in sorted(slots, reverse=True):
            words.insert(s, "{}")
        templates.append(" ".join(words))
    weights = [rng.uniform(0.5, 2.0) for _ in templates]
    out = []
    for _ in range(n_records):
        t = rng.choices(templates, weights)[0]
        text = t.format(*(rng.randint(0, 99999) for _ in range(t.count("{}"))))
        out.append(mask(text).split())
    return out


def shuffled_sentence_corpus(seed: int = 0, n_tokens: int = 20000) -> list[list[str]]:
    """Distinct pseudo-English sentences of shuffled words totalling ``n_tokens``."""
    rng = _stream(seed, "sentences")
    seen: set[tuple[str, ...]] = set()
    out: list[list[str]] = []
    total = 0
    while total < n_tokens:
        sent = tuple(rng.sample(_WORDS, rng.randint(6, 14)))
        if sent in seen:
            continue
        seen.add(sent)
        out.append(list(sent))
        total += len(sent)
    return out


def degradation_count(corpus: LabeledCorpus) -> int:
    names = {DEGRADE_TIMEOUT[0], DEGRADE_RETRY[0], DEGRADE_ESCALATE[0]}
    return sum(1 for n in corpus.templates if n in names)
