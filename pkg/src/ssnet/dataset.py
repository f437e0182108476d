"""Dataset directory layout: per-stream frame/annotation files plus a manifest."""

from __future__ import annotations

import json
import os

from .data import AnnotatedStream, load_stream, write_stream
from .topology import SkeletonTopology, load_topology


def write_dataset(
    streams: list[AnnotatedStream],
    topology: SkeletonTopology,
    out_dir: str,
    manifest_extra: dict | None = None,
) -> None:
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for stream in streams:
        name = stream.name or f"stream_{len(names):03d}"
        names.append(name)
        write_stream(
            stream,
            os.path.join(out_dir, f"{name}.frames.jsonl"),
            os.path.join(out_dir, f"{name}.annotations.json"),
        )
    with open(os.path.join(out_dir, "topology.json"), "w", encoding="utf-8") as fh:
        fh.write(topology.to_json() + "\n")
    manifest = {
        "streams": names,
        "class_count": streams[0].class_count if streams else 0,
        "joint_count": topology.joint_count,
    }
    manifest.update(manifest_extra or {})
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_dataset(data_dir: str) -> tuple[list[AnnotatedStream], SkeletonTopology, dict]:
    with open(os.path.join(data_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    topology = load_topology(os.path.join(data_dir, "topology.json"))
    streams = []
    for name in manifest["streams"]:
        streams.append(
            load_stream(
                os.path.join(data_dir, f"{name}.frames.jsonl"),
                os.path.join(data_dir, f"{name}.annotations.json"),
                topology.joint_count,
                name=name,
            )
        )
    return streams, topology, manifest
