"""On-disk datasets.

Two layouts are understood:

``graphs`` layout
    ``graphs/g00000.jsonl ...`` (one graph per file), ``labels.json`` and
    ``split.json``. Graph-level labels map the graph index to a flag,
    node-level labels map entity ids to a flag.

``stream`` layout
    ``train.jsonl`` (benign) and ``test.jsonl`` event streams that are cut
    into batch graphs on load, plus node-level ``labels.json``.

Both carry a ``dataset.json`` manifest. Graph files start with a ``#``
header line; files marked ``reduced`` are loaded without edge reduction, and
a ``malicious`` list in a graph-level header names the graph's attack entities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .exceptions import DataError
from .graph import (
    DEFAULT_EDGE_KINDS,
    DEFAULT_WINDOW_NS,
    EventRecord,
    ProvenanceGraph,
    batch_split,
    build_graph,
    cleanup,
    parse_events,
    reduce_cpr,
)

MANIFEST = "dataset.json"
FORMAT_VERSION = 1
BENIGN, MALICIOUS = "benign", "malicious"


@dataclass
class Dataset:
    level: str  # "graph" or "node"
    graphs: list[ProvenanceGraph]
    train_idx: list[int]
    test_idx: list[int]
    header: dict = field(default_factory=dict)

    def subset(self, name: str) -> list[int]:
        if name == "train":
            return list(self.train_idx)
        if name == "test":
            return list(self.test_idx)
        if name == "all":
            return list(range(len(self.graphs)))
        raise ValueError(f"unknown subset {name!r}")


def event_to_dict(ev: EventRecord) -> dict:
    d = {"src": ev.src_id, "sk": str(ev.src_kind), "dst": ev.dst_id, "dk": str(ev.dst_kind), "e": ev.edge_kind, "t": ev.timestamp}
    if ev.src_feature is not None and ev.src_feature != ev.src_kind:
        d["sl"] = str(ev.src_feature)
    if ev.dst_feature is not None and ev.dst_feature != ev.dst_kind:
        d["dl"] = str(ev.dst_feature)
    return d


def graph_to_events(g: ProvenanceGraph) -> list[EventRecord]:
    n = g.nodes
    return [
        EventRecord(e.src, n[e.src].kind, e.dst, n[e.dst].kind, e.kind, e.t, n[e.src].feature, n[e.dst].feature)
        for e in g.edges
    ]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_events(path: Path, events: Iterable[EventRecord], header: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write("# " + _dumps(header) + "\n")
        for ev in events:
            fh.write(_dumps(event_to_dict(ev)) + "\n")


def read_header(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        try:
            return json.loads(first[1:])
        except json.JSONDecodeError:
            return {}
    return {}


def read_events(path: Path, fmt: str = "jsonl", edge_kinds: Sequence[str] = DEFAULT_EDGE_KINDS):
    with open(path, encoding="utf-8") as fh:
        return parse_events(fh, fmt, edge_kinds)


def _flag(value) -> bool:
    if value in (True, MALICIOUS, 1, "1", "true"):
        return True
    if value in (False, BENIGN, 0, "0", "false"):
        return False
    raise DataError(f"invalid ground-truth flag {value!r}")


def read_labels(path: Path) -> dict[str, bool]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return {str(k): _flag(v) for k, v in raw.items()}


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def save_graph_dataset(
    path,
    graphs: Sequence[ProvenanceGraph],
    train_idx: Sequence[int],
    test_idx: Sequence[int],
    level: str,
    header: dict | None = None,
    raw_events: Sequence[Sequence[EventRecord]] | None = None,
) -> Path:
    """Write the ``graphs`` layout.

    With ``raw_events`` the unreduced events are written and reduced again on
    load; otherwise the graphs are written as they are and marked reduced.
    """
    root = Path(path)
    gdir = root / "graphs"
    gdir.mkdir(parents=True, exist_ok=True)
    for old in gdir.glob("g*.jsonl"):
        old.unlink()
    meta = dict(header or {})
    reduced = raw_events is None
    for i, g in enumerate(graphs):
        events = graph_to_events(g) if reduced else raw_events[i]
        head = {"graph": i, "reduced": reduced}
        if level == "graph" and isinstance(g.ground_truth, Mapping):
            head["malicious"] = g.malicious_nodes()
        write_events(gdir / f"g{i:05d}.jsonl", events, head)
    if level == "graph":
        labels = {str(i): (MALICIOUS if g.is_malicious else BENIGN) for i, g in enumerate(graphs)}
    else:
        labels = {}
        for g in graphs:
            if isinstance(g.ground_truth, dict):
                for n, bad in g.ground_truth.items():
                    if bad or labels.get(n) != MALICIOUS:
                        labels[n] = MALICIOUS if bad else BENIGN
    _write_json(root / "labels.json", labels)
    _write_json(root / "split.json", {"train": [int(i) for i in train_idx], "test": [int(i) for i in test_idx]})
    _write_json(root / MANIFEST, {"layout": "graphs", "level": level, "version": FORMAT_VERSION, **meta})
    return root


def save_stream_dataset(path, train_events, test_events, labels: dict[str, bool], header: dict | None = None) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    write_events(root / "train.jsonl", train_events)
    write_events(root / "test.jsonl", test_events)
    _write_json(root / "labels.json", {k: MALICIOUS if v else BENIGN for k, v in sorted(labels.items())})
    _write_json(root / MANIFEST, {"layout": "stream", "level": "node", "version": FORMAT_VERSION, **(header or {})})
    return root


def _parse_or_fail(path, fmt, edge_kinds):
    records, report = read_events(path, fmt, edge_kinds)
    if report.rejected:
        line, msg = report.errors[0]
        raise DataError(f"{path}: {report.rejected} malformed record(s), first at line {line}: {msg}")
    return records


def split_events(events, batch_size, window, gt):
    if not events:
        return []
    if batch_size == 0:
        return [cleanup(reduce_cpr(build_graph(events, gt), window))]
    return batch_split(events, batch_size, window, gt)


def load_dataset(
    path,
    window: int = DEFAULT_WINDOW_NS,
    batch_size: int = 50,
    fmt: str = "jsonl",
    edge_kinds: Sequence[str] = DEFAULT_EDGE_KINDS,
) -> Dataset:
    root = Path(path)
    if not (root / MANIFEST).exists():
        raise DataError(f"{root} is not a dataset directory (no {MANIFEST})")
    with open(root / MANIFEST, encoding="utf-8") as fh:
        header = json.load(fh)
    labels = read_labels(root / "labels.json") if (root / "labels.json").exists() else {}
    level = header.get("level", "graph")
    if header.get("layout") == "stream":
        train = _parse_or_fail(root / "train.jsonl", fmt, edge_kinds)
        test = _parse_or_fail(root / "test.jsonl", fmt, edge_kinds)
        # training streams are benign by definition; unlabelled test entities count as benign
        train_gt = {n: False for r in train for n in (r.src_id, r.dst_id)}
        test_gt = {n: labels.get(n, False) for r in test for n in (r.src_id, r.dst_id)}
        train_graphs = split_events(train, batch_size, window, train_gt)
        test_graphs = split_events(test, batch_size, window, test_gt)
        graphs = train_graphs + test_graphs
        n = len(train_graphs)
        return Dataset("node", graphs, list(range(n)), list(range(n, len(graphs))), header)

    files = sorted((root / "graphs").glob("g*.jsonl"))
    graphs = []
    for i, f in enumerate(files):
        records = _parse_or_fail(f, fmt, edge_kinds)
        head = read_header(f)
        if level == "graph":
            gt = labels.get(str(i))
            if "malicious" in head:
                bad = set(head["malicious"])
                gt = {n: n in bad for r in records for n in (r.src_id, r.dst_id)}
                if gt and any(gt.values()) != labels.get(str(i), any(gt.values())):
                    raise DataError(f"{f}: graph flag disagrees with its malicious entities")
        else:
            ids = {r.src_id for r in records} | {r.dst_id for r in records}
            gt = {n: labels.get(n, False) for n in ids}
        g = build_graph(records, gt)
        if not head.get("reduced", False):
            g = reduce_cpr(g, window)
        graphs.append(cleanup(g))
    split_path = root / "split.json"
    if split_path.exists():
        with open(split_path, encoding="utf-8") as fh:
            split = json.load(fh)
        train_idx, test_idx = split["train"], split["test"]
    else:
        train_idx, test_idx = [], list(range(len(graphs)))
    bad = [i for i in list(train_idx) + list(test_idx) if not 0 <= i < len(graphs)]
    if bad:
        raise DataError(f"split references missing graph(s) {bad[:5]}")
    return Dataset(level, graphs, list(train_idx), list(test_idx), header)
