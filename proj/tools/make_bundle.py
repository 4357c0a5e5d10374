#!/usr/bin/env python3
"""Convert raw benchmark downloads into the bundle layout read by `hes`.

Supported inputs:
  geom-gcn  directory with out1_node_feature_label.txt and out1_graph_edges.txt
            (Texas, Squirrel, Chameleon, ...); optional split file *.npz
  linqs     directory with <name>.content and <name>.cites (Cora, Citeseer)

Edges are symmetrized; self-loops and duplicates are dropped.
"""
import argparse
import json
import pathlib
import random
import sys


def read_geom_gcn(src):
    feats, labels = {}, {}
    with open(src / "out1_node_feature_label.txt") as f:
        next(f)
        for line in f:
            node, feat, label = line.rstrip("\n").split("\t")
            node = int(node)
            feats[node] = [float(x) for x in feat.split(",")]
            labels[node] = int(label)
    n = len(feats)
    if sorted(feats) != list(range(n)):
        sys.exit("geom-gcn node ids are not contiguous")
    edges = []
    with open(src / "out1_graph_edges.txt") as f:
        next(f)
        for line in f:
            u, v = map(int, line.split())
            edges.append((u, v))
    dim = len(feats[0])
    # some files store sparse indices instead of dense rows (film)
    if any(len(r) != dim for r in feats.values()):
        width = 1 + max(int(x) for r in feats.values() for x in r)
        dense = {}
        for k, r in feats.items():
            row = [0.0] * width
            for x in r:
                row[int(x)] = 1.0
            dense[k] = row
        feats = dense
    return [feats[i] for i in range(n)], [labels[i] for i in range(n)], edges


def read_linqs(src, stem):
    ids, rows, raw_labels = {}, [], []
    with open(src / f"{stem}.content") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(rows)
            rows.append([float(x) for x in parts[1:-1]])
            raw_labels.append(parts[-1])
    classes = {c: i for i, c in enumerate(sorted(set(raw_labels)))}
    edges = []
    with open(src / f"{stem}.cites") as f:
        for line in f:
            parts = line.split()
            if len(parts) == 2 and parts[0] in ids and parts[1] in ids:
                edges.append((ids[parts[1]], ids[parts[0]]))
    return rows, [classes[c] for c in raw_labels], edges


def dedup(n, edges):
    seen = set()
    out = []
    for u, v in edges:
        if u == v or not (0 <= u < n and 0 <= v < n):
            continue
        key = (min(u, v), max(u, v))
        if key not in seen:
            seen.add(key)
            out.append(key)
    return sorted(out)


def npz_split(path):
    import numpy as np
    data = np.load(path)
    pick = lambda k: [int(i) for i in np.flatnonzero(data[k])]
    return {"train": pick("train_mask"), "val": pick("val_mask"), "test": pick("test_mask")}


def random_split(n, fractions, seed):
    order = list(range(n))
    random.Random(seed).shuffle(order)
    a = round(fractions[0] * n)
    b = a + round(fractions[1] * n)
    return {"train": sorted(order[:a]), "val": sorted(order[a:b]), "test": sorted(order[b:])}


def write_bundle(out, name, feats, labels, edges, split):
    out.mkdir(parents=True, exist_ok=True)
    n = len(labels)
    meta = {"name": name, "num_nodes": n, "num_classes": max(labels) + 1,
            "feature_dim": len(feats[0]) if feats else 0}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    with open(out / "edges.tsv", "w") as f:
        f.writelines(f"{u}\t{v}\n" for u, v in edges)
    with open(out / "features.tsv", "w") as f:
        for row in feats:
            f.write("\t".join(repr(x) for x in row) + "\n")
    with open(out / "labels.tsv", "w") as f:
        f.writelines(f"{i}\t{l}\n" for i, l in enumerate(labels))
    (out / "splits.json").write_text(json.dumps(split) + "\n")
    print(f"{name}: {n} nodes, {len(edges)} undirected edges, {meta['num_classes']} classes, "
          f"{meta['feature_dim']} features -> {out}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("format", choices=["geom-gcn", "linqs"])
    ap.add_argument("src", type=pathlib.Path)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--name", required=True)
    ap.add_argument("--stem", help="linqs file stem (default: --name)")
    ap.add_argument("--split-npz", type=pathlib.Path, help="geom-gcn split file with train/val/test masks")
    ap.add_argument("--fractions", type=float, nargs=3, default=[0.48, 0.32, 0.2])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.format == "geom-gcn":
        feats, labels, edges = read_geom_gcn(args.src)
    else:
        feats, labels, edges = read_linqs(args.src, args.stem or args.name)
    edges = dedup(len(labels), edges)
    split = npz_split(args.split_npz) if args.split_npz else random_split(len(labels), args.fractions, args.seed)
    write_bundle(args.out, args.name, feats, labels, edges, split)


if __name__ == "__main__":
    main()
