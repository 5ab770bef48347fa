"""Line-oriented text formats for trees, instances and matching laws.

Every file is a sequence of records, one per line; blank lines and ``#``
comments are ignored. Vertex ids must be ``0..n-1``.

    root <id>
    edge <u> <v> <weight>
    spot <v> | car <v> | kill <v>          search instances
    server <v> [count] | request <v>       matching instances
    pi <server#> <vertex> <prob>           one-step matching law
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mw_search import SearchInstance
from .tree_metric import TreeError, WeightedTree


class FormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


@dataclass
class Document:
    tree: WeightedTree
    spots: list[int] = field(default_factory=list)
    car: int | None = None
    kills: list[int] = field(default_factory=list)
    servers: list[int] = field(default_factory=list)     # expanded by count
    requests: list[int] = field(default_factory=list)
    pi: list[tuple[int, int, float]] = field(default_factory=list)

    def search_instance(self) -> SearchInstance:
        if self.car is None:
            raise FormatError("search instance needs a 'car' line")
        return SearchInstance(self.tree, self.spots, self.car, self.kills)

    def pi_matrix(self) -> np.ndarray:
        k = len(self.servers)
        if k == 0:
            raise FormatError("pi needs 'server' lines")
        out = np.zeros((k, self.tree.n))
        seen = set()
        for i, v, p in self.pi:
            if not 0 <= i < k:
                raise FormatError(f"pi names server {i}, but only {k} are declared")
            self.tree._check(v)
            if (i, v) in seen:
                raise FormatError(f"pi entry ({i}, {v}) given twice")
            seen.add((i, v))
            out[i, v] = p
        return out


def _int(tok: str, line: int) -> int:
    try:
        x = int(tok)
    except ValueError:
        raise FormatError(f"expected an integer, got {tok!r}", line) from None
    if x < 0:
        raise FormatError(f"negative id {x}", line)
    return x


def _real(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"expected a number, got {tok!r}", line) from None


def parse(text: str) -> Document:
    root = None
    edges = []
    rec = {"spot": [], "kill": [], "server": [], "request": [], "pi": []}
    car = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        arity = {"root": (1, 1), "edge": (3, 3), "spot": (1, 1), "car": (1, 1), "kill": (1, 1),
                 "server": (1, 2), "request": (1, 1), "pi": (3, 3)}.get(head)
        if arity is None:
            raise FormatError(f"unknown record {head!r}", no)
        if not arity[0] <= len(args) <= arity[1]:
            raise FormatError(f"'{head}' takes {arity[0]}..{arity[1]} fields", no)
        if head == "root":
            if root is not None:
                raise FormatError("duplicate 'root'", no)
            root = _int(args[0], no)
        elif head == "edge":
            edges.append((_int(args[0], no), _int(args[1], no), _real(args[2], no)))
        elif head == "car":
            if car is not None:
                raise FormatError("duplicate 'car'", no)
            car = _int(args[0], no)
        elif head == "server":
            cnt = _int(args[1], no) if len(args) > 1 else 1
            rec["server"].extend([_int(args[0], no)] * cnt)
        elif head == "pi":
            rec["pi"].append((_int(args[0], no), _int(args[1], no), _real(args[2], no)))
        else:
            rec[head].append(_int(args[0], no))
    if root is None:
        raise FormatError("missing 'root' line")
    ids = {root} | {u for u, _, _ in edges} | {v for _, v, _ in edges}
    n = len(edges) + 1
    if ids != set(range(len(ids))):
        raise FormatError("vertex ids must be 0..n-1 with no gaps")
    if len(ids) != n:
        # more edges than a tree allows on these vertices means a cycle
        raise FormatError("edges form a cycle" if len(ids) < n else "tree is disconnected")
    try:
        tree = WeightedTree(n, edges, root)
    except TreeError as e:
        raise FormatError(str(e)) from None
    for key in ("spot", "kill", "server", "request"):
        for v in rec[key]:
            if v >= n:
                raise FormatError(f"{key} at unknown vertex {v}")
    if car is not None and car >= n:
        raise FormatError(f"car at unknown vertex {car}")
    return Document(tree, rec["spot"], car, rec["kill"], rec["server"], rec["request"], rec["pi"])


def load(path: str | Path) -> Document:
    return parse(Path(path).read_text())


def parse_tree(text: str) -> WeightedTree:
    return parse(text).tree


# -- writers -------------------------------------------------------------------

def tree_lines(tree: WeightedTree) -> list[str]:
    return [f"root {tree.root}"] + [f"edge {u} {v} {float(w)!r}" for u, v, w in tree.edges]


def search_lines(instance: SearchInstance) -> list[str]:
    out = tree_lines(instance.tree)
    out += [f"spot {s}" for s in instance.spots]
    out.append(f"car {instance.start}")
    out += [f"kill {r}" for r in instance.kills]
    return out


def match_lines(tree: WeightedTree, servers, requests) -> list[str]:
    # one line per server keeps the server numbering that ``pi`` lines use
    out = tree_lines(tree)
    out += [f"server {int(s)}" for s in servers]
    out += [f"request {int(r)}" for r in requests]
    return out


def pi_lines(pi: np.ndarray) -> list[str]:
    k, n = pi.shape
    return [f"pi {i} {v} {float(pi[i, v])!r}" for i in range(k) for v in range(n) if pi[i, v] != 0]


def dumps(lines: list[str]) -> str:
    return "\n".join(lines) + "\n"
