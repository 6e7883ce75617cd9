"""Graphviz and PLY views of a scene graph."""

from __future__ import annotations

import colorsys

import numpy as np

from .atlas import SceneGraph
from .geometry import SemanticClass
from .plyio import write_colored_ply


def _node(kind: str, ident) -> str:
    return f"{kind}_{ident}"


def to_dot(g: SceneGraph) -> str:
    """Floor -> rooms -> walls/ground -> keyframes, one DOT edge per graph edge."""
    lines = ["digraph scene_graph {"]
    if not (g.keyframes or g.components or g.rooms or g.floor or g.markers):
        lines.append("}")
        return "\n".join(lines) + "\n"
    lines.append("  rankdir=TB;")
    if g.floor is not None:
        lines.append(f'  {_node("floor", g.floor.id)} [label="floor {g.floor.id}", shape=doubleoctagon];')
    for rid, room in sorted(g.rooms.items()):
        label = f"room {rid}" + (f"\\n{room.label}" if room.label else "")
        lines.append(f'  {_node("room", rid)} [label="{label}", shape=box];')
    for cid, comp in sorted(g.components.items()):
        kind = "wall" if comp.plane.cls is SemanticClass.WALL else "ground"
        lines.append(f'  {_node(kind, cid)} [label="{kind} {cid}", shape=ellipse];')
    for kid in sorted(g.keyframes):
        lines.append(f'  {_node("kf", kid)} [label="kf {kid}", shape=point];')
    for mid in sorted(g.markers):
        lines.append(f'  {_node("marker", mid)} [label="marker {mid}", shape=diamond];')

    def comp_node(cid):
        cls = g.components[cid].plane.cls
        return _node("wall" if cls is SemanticClass.WALL else "ground", cid)

    for kind, parent, child in g.edges():
        if kind == "floor_room":
            a, b = _node("floor", parent), _node("room", child)
        elif kind in ("room_wall", "room_ground"):
            a, b = _node("room", parent), comp_node(child)
        elif kind == "room_marker":
            a, b = _node("room", parent), _node("marker", child)
        else:
            a, b = comp_node(parent), _node("kf", child)
        lines.append(f'  {a} -> {b} [label="{kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def component_color(cid: int) -> tuple[int, int, int]:
    h = (cid * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(h, 0.75, 0.95)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def write_components_ply(g: SceneGraph, path) -> int:
    """Merged component points, colored per component; returns the point count."""
    pts, cols, ids = [], [], []
    for cid, comp in sorted(g.components.items()):
        p = comp.points
        if p.shape[0] == 0:
            continue
        pts.append(p)
        cols.append(np.tile(component_color(cid), (p.shape[0], 1)))
        ids.append(np.full(p.shape[0], cid))
    if pts:
        write_colored_ply(path, np.vstack(pts), np.vstack(cols), np.concatenate(ids))
        return int(sum(p.shape[0] for p in pts))
    write_colored_ply(path, np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    return 0
