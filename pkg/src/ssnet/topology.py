"""Skeleton topology: a rooted tree over joints with at most two children per node.

The joint order of the topology file defines the coordinate layout of every
frame record: body coordinates are stored as ``[x0, y0, z0, ..., x_{J-1}, ...]``
indexed by joint id. Joint ids must therefore be the contiguous range 0..J-1.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources


class TopologyError(ValueError):
    """Raised when a topology document violates the rooted-binary-tree rules."""


@dataclass(frozen=True)
class SkeletonTopology:
    joint_count: int
    root: int
    children: tuple[tuple[int, ...], ...]  # per joint, 0-2 child ids
    names: tuple[str, ...] = field(default=())

    def parent_of(self, joint: int) -> int | None:
        for j, kids in enumerate(self.children):
            if joint in kids:
                return j
        return None

    def height(self) -> int:
        """Number of nodes on the longest root-to-leaf path."""

        def depth(j: int) -> int:
            kids = self.children[j]
            return 1 + max((depth(c) for c in kids), default=0)

        return depth(self.root)

    def digest(self) -> str:
        """Structural sha256 over root and children (names are cosmetic)."""
        doc = {
            "root": self.root,
            "children": {str(j): list(self.children[j]) for j in range(self.joint_count)},
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self) -> str:
        doc: dict = {
            "root": self.root,
            "children": {str(j): list(k) for j, k in enumerate(self.children) if k},
        }
        if self.names:
            doc["names"] = {str(j): n for j, n in enumerate(self.names)}
        return json.dumps(doc, indent=2)


def parse_topology(text: str) -> SkeletonTopology:
    """Parse and validate a topology document.

    Rejects branching above 2, multiple roots/parents, cycles, and joints
    unreachable from the root, naming the offending joint.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"topology is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "root" not in doc:
        raise TopologyError("topology must be an object with a 'root' field")

    root = int(doc["root"])
    raw_children = doc.get("children", {})
    child_map: dict[int, list[int]] = {}
    mentioned = {root}
    for key, kids in raw_children.items():
        j = int(key)
        kids = [int(c) for c in kids]
        if len(kids) > 2:
            raise TopologyError(f"branching exceeds 2 at joint {j}")
        if len(set(kids)) != len(kids):
            raise TopologyError(f"duplicate child at joint {j}")
        child_map[j] = kids
        mentioned.add(j)
        mentioned.update(kids)

    for j in mentioned:
        if j < 0:
            raise TopologyError(f"invalid joint id {j}")
    joint_count = max(mentioned) + 1

    parent: dict[int, int] = {}
    for j, kids in child_map.items():
        for c in kids:
            if c == root:
                raise TopologyError(f"root joint {root} has a parent ({j})")
            if c in parent:
                raise TopologyError(f"joint {c} has multiple parents ({parent[c]} and {j})")
            parent[c] = j

    # Reachability doubles as the cycle check: a cycle is unreachable from
    # the root because each of its joints already has its single parent
    # inside the cycle.
    seen = set()
    stack = [root]
    while stack:
        j = stack.pop()
        if j in seen:
            raise TopologyError(f"cycle detected at joint {j}")
        seen.add(j)
        stack.extend(child_map.get(j, ()))
    for j in range(joint_count):
        if j not in seen:
            raise TopologyError(f"joint {j} unreachable from root {root}")

    names_doc = doc.get("names") or {}
    names: tuple[str, ...] = ()
    if names_doc:
        names = tuple(str(names_doc.get(str(j), f"joint_{j}")) for j in range(joint_count))

    children = tuple(tuple(child_map.get(j, ())) for j in range(joint_count))
    return SkeletonTopology(joint_count=joint_count, root=root, children=children, names=names)


def load_topology(path) -> SkeletonTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read())


def default_topology() -> SkeletonTopology:
    """The shipped 25-joint binary tree (head root, height 8)."""
    text = resources.files("ssnet.resources").joinpath("skeleton25.json").read_text()
    return parse_topology(text)
