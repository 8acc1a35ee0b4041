"""Small deterministic invocations of every CLI subcommand, shared by the CLI and acceptance tests."""
import os
from typing import Dict, List

import numpy as np

from graphonkit.graph_io import Graph, to_edge_list
from graphonkit.graphon import constant_graphon, sample_graph, uniform_step_graphon

DATA = os.path.join(os.path.dirname(__file__), "data")
MUTAG = os.path.join(DATA, "MUTAG")


def write_corpus(directory: str, p: float, label: int, count: int = 4, n: int = 14, seed: int = 0) -> str:
    os.makedirs(directory, exist_ok=True)
    w = constant_graphon(p)
    for i in range(count):
        g = Graph(sample_graph(w, n, seed + i).adjacency, label)
        with open(os.path.join(directory, f"g{i}.txt"), "w", encoding="utf-8") as fh:
            fh.write(to_edge_list(g))
    return directory


def prepare(root: str) -> Dict[str, str]:
    """Input corpora and graphon files under ``root/inputs``."""
    inputs = os.path.join(root, "inputs")
    a = write_corpus(os.path.join(inputs, "a"), 0.2, 0)
    b = write_corpus(os.path.join(inputs, "b"), 0.6, 1, seed=50)
    mixed = os.path.join(inputs, "mixed")
    write_corpus(mixed, 0.2, 0, count=3)
    for i in range(3):
        g = Graph(sample_graph(constant_graphon(0.6), 14, 90 + i).adjacency, 1)
        with open(os.path.join(mixed, f"h{i}.txt"), "w", encoding="utf-8") as fh:
            fh.write(to_edge_list(g))
    rng = np.random.default_rng(0)
    graphons = {}
    for name, size in (("w1", 6), ("w2", 4)):
        v = rng.random((size, size))
        path = os.path.join(inputs, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(uniform_step_graphon((v + v.T) / 2).to_json())
        graphons[name] = path
    return {"a": a, "b": b, "mixed": mixed, **graphons}


def commands(paths: Dict[str, str], out: str) -> Dict[str, List[str]]:
    """One small argv per subcommand, each writing into its own folder under ``out``."""
    solver = ["--outer-iters", "20"]
    return {
        "estimate": ["estimate", "--input", MUTAG, "--oracle-size", "12", "--barycenter-iters", "2",
                     "--seed", "7", "--out", os.path.join(out, "estimate")] + solver,
        "sample": ["sample", "--graphon", paths["w1"], "--nodes", "15", "--count", "3", "--label", "1",
                   "--seed", "3", "--out", os.path.join(out, "sample")],
        "fit": ["fit", "--input", paths["a"], "--format", "edgelist", "--oracle", paths["w1"], "--bases", "3",
                "--basis-size", "5", "--epochs", "2", "--seed", "1", "--out", os.path.join(out, "fit")] + solver,
        "train": ["train", "--input", paths["mixed"], "--format", "edgelist", "--oracle-size", "6",
                  "--bases", "2", "--basis-size", "5", "--epochs", "2", "--lambda-sweep", "--seed", "2",
                  "--out", os.path.join(out, "train")] + solver,
        "distance": ["distance", "--a", paths["a"], "--b", paths["b"], "--format", "edgelist",
                     "--oracle-size", "6", "--barycenter-iters", "2", "--seed", "4",
                     "--out", os.path.join(out, "distance")] + solver,
        "verify": ["verify", "--oracle", paths["w1"], "--predicted", paths["w2"], "--size", "6",
                   "--out", os.path.join(out, "verify")],
        "stats": ["stats", "--input", MUTAG, "--out", os.path.join(out, "stats")],
    }


def snapshot(directory: str) -> Dict[str, bytes]:
    files = {}
    for base, _, names in os.walk(directory):
        for name in names:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                files[os.path.relpath(path, directory)] = fh.read()
    return files
