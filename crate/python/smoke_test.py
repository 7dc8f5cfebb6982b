#!/usr/bin/env python3
"""Smoke test for the lossland_py extension module.

Builds nothing itself: run `cargo build -p lossland-py` first (or pass
--release and build in release mode). The script locates the produced
cdylib, stages it under an importable name, and exercises the pipeline:
SBM dataset -> training -> directions -> landscape grid -> trajectory -> SVG.
"""

import argparse
import math
import shutil
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def stage_module(profile: str) -> Path:
    lib = REPO_ROOT / "target" / profile / "liblossland_py.so"
    if not lib.is_file():
        sys.exit(
            f"{lib} not found - run `cargo build -p lossland-py"
            + (" --release`" if profile == "release" else "`")
        )
    stage = Path(tempfile.mkdtemp(prefix="lossland_py_"))
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(lib, stage / f"lossland_py{suffix}")
    return stage


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--release", action="store_true", help="use the release build")
    args = parser.parse_args()

    sys.path.insert(0, str(stage_module("release" if args.release else "debug")))
    import lossland_py as ll

    g = ll.Graph.synthetic_sbm(3, 10, 0.7, 0.1, 8, 42)
    assert g.num_nodes == 30
    assert g.num_classes == 3
    assert g.num_edge_entries % 2 == 0

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        # dataset directory round trip
        g.write_dataset(tmp / "data")
        g2 = ll.Graph.load_dataset(tmp / "data")
        assert g2.num_nodes == g.num_nodes
        assert g2.labels == g.labels

        # sparsification keeps a subset of edges
        sparse = g.sparsify(0.5, 7)
        assert sparse.num_edge_entries <= g.num_edge_entries

        # over-smoothing: repeated propagation collapses the embeddings
        assert g.oversmoothing_score(16) < g.oversmoothing_score(1)

        cfg = ll.ModelConfig("gcn", 2, 6, jumping_knowledge="none", seed=42)
        record = ll.train(cfg, g, epochs_max=60, patience=60)
        assert record.num_snapshots == 61
        assert record.train_loss[record.best_epoch] <= record.train_loss[0]

        # snapshot file round trip
        record.save(tmp / "snap")
        loaded = ll.TrainRecord.load(tmp / "snap")
        assert loaded.train_loss == record.train_loss
        assert loaded.best_epoch == record.best_epoch

        ratios = {}
        for method in ("random", "pca-gram", "learnable"):
            dirs = ll.compute_directions(record, method, seed=3)
            assert dirs.dim == record.dim
            _, total = ll.reconstruction_error(record, dirs)
            ratios[method] = total

            traj = ll.project_trajectory(record, dirs)
            epoch, x, y, residual, _ = traj.points[record.best_epoch]
            assert (epoch, x, y, residual) == (record.best_epoch, 0.0, 0.0, 0.0)

        # the fitted basis reconstructs no worse than a random one
        assert ratios["learnable"] <= ratios["random"] + 1e-9

        dirs = ll.compute_directions(record, "pca-gram")
        assert dirs.orthonormality_defect < 1e-10
        dirs.save(tmp / "dirs")
        assert ll.DirectionPair.load(tmp / "dirs").b1 == dirs.b1

        grid = ll.evaluate_landscape(cfg, g, record, dirs, range=1.0, resolution=9)
        assert grid.resolution == 9
        assert all(map(math.isfinite, grid.values))
        center = grid.value(4, 4)
        assert abs(center - record.train_loss[record.best_epoch]) < 1e-12
        assert grid.count_strict_local_minima() >= 1

        traj = ll.project_trajectory(record, dirs)
        grid.render_svg(tmp / "plot.svg", trajectory=traj, levels=10)
        svg = (tmp / "plot.svg").read_text()
        assert svg.startswith("<?xml") and "</svg>" in svg and "NaN" not in svg

    print("smoke test passed")


if __name__ == "__main__":
    main()
