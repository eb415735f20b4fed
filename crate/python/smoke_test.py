#!/usr/bin/env python3
"""Smoke test for the vdsom_py extension module.

Build and run:

    cargo build --release -p vdsom-py
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))


def load_module():
    """Import vdsom_py from the cargo build output."""
    for profile in ("release", "debug"):
        lib = os.path.join(HERE, "..", "target", profile, "libvdsom_py.so")
        if os.path.exists(lib):
            import shutil

            stage = tempfile.mkdtemp(prefix="vdsom_py_")
            shutil.copy(lib, os.path.join(stage, "vdsom_py.so"))
            sys.path.insert(0, stage)
            import vdsom_py

            return vdsom_py
    sys.exit("libvdsom_py.so not found; run `cargo build --release -p vdsom-py` first")


def approx(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    v = load_module()
    print(f"vdsom_py {v.__version__}")

    # grid construction and latent distances
    grid = v.Grid(3, 3, topology="planar", lo=-1.0, hi=1.0)
    assert grid.n == 9
    assert grid.dist2(0, 8) == 8.0
    assert sorted(grid.neighbors(4)) == [1, 3, 5, 7]
    torus = v.Grid(4, 4, topology="toroidal")
    assert torus.dist2(0, 15) == 2.0
    print("grid ok")

    # responsibilities on a 1x3 line: logits (0, -0.5, -2)
    line = v.Grid(1, 3, lo=0.0, hi=2.0)
    q = v.responsibilities(line, winner=0, sigma=1.0, eta=1.0)
    assert approx(sum(q), 1.0, 1e-12)
    assert approx(q[0], 0.57409699296769456, 1e-12)
    print("responsibilities ok")

    # objective and gradient on a random map
    state = v.MapState.random(nodes=9, dim=2, sigma=1.3, seed=7)
    x = [0.4, -0.1]
    value, winner = v.per_sample_objective(grid, state, x)
    g = v.gradient(grid, state, x)
    assert g.winner == winner
    assert approx(g.objective, value, 1e-12)
    assert approx(sum(g.responsibilities), 1.0, 1e-12)
    print(f"gradient ok (winner {winner}, objective {value:.4f}, g_sigma {g.g_sigma:.4f})")

    # a few optimizer steps shrink the winner's quantization error
    adam = v.Adam(nodes=9, dim=2, alpha=1e-2)
    before = min(sum((wx - xx) ** 2 for wx, xx in zip(w, x)) for w in state.weights)
    for _ in range(50):
        adam.step(state, v.gradient(grid, state, x))
    after = min(sum((wx - xx) ** 2 for wx, xx in zip(w, x)) for w in state.weights)
    assert after < before
    assert adam.step_count == 50
    print(f"adam ok (winner error {before:.4f} -> {after:.4f})")

    # dsom single-node closed form
    one = v.Grid(1, 1, topology="toroidal")
    dsom = v.Dsom([[0.0, 0.0]], eta=1.0, lr=0.5)
    dsom.step(one, [1.0, 0.0])
    assert dsom.weights == [[0.5, 0.0]]
    print("dsom ok")

    # streams are seeded and reproducible
    a = v.Stream.moons(seed=11)
    b = v.Stream.moons(seed=11)
    assert a.batch(5) == b.batch(5)
    mut = v.Stream.mutate(v.Stream.moons(seed=1, noise_std=0.0),
                          v.Stream.circles(seed=2, noise_std=0.0), 3)
    pts = [mut.next() for _ in range(6)]
    assert all(len(p) == 2 for p in pts)
    print("streams ok")

    # distortion against a hand value: one weight, two samples
    assert v.distortion([[0.0, 0.0]], [[1.0, 0.0], [0.0, 2.0]]) == 2.5
    print("distortion ok")

    # gradient verification suite
    passed, max_rel, max_abs = v.gradcheck(trials=30, seed=42)
    assert passed, f"gradcheck failed: rel {max_rel}, abs {max_abs}"
    print(f"gradcheck ok (max rel {max_rel:.2e})")

    # end-to-end tiny training run through the config interface
    out_dir = tempfile.mkdtemp(prefix="vdsom_train_")
    summary = v.run_train({
        "grid.rows": 5, "grid.cols": 5,
        "steps": 500, "log_interval": 100,
        "snapshot_steps": "0,500",
        "stream.kind": "moons", "stream.seed": 11,
        "seed": 42, "eval_batch": 128,
        "output_dir": out_dir,
    })
    assert summary["final_sigma"] > 0
    assert math.isfinite(summary["final_distortion"])
    assert len(summary["log"]) == 5
    emitted = summary["emitted"]
    assert any(p.endswith("train.csv") for p in emitted)
    assert any(p.endswith(".svg") for p in emitted)
    print(f"run_train ok (sigma {summary['final_sigma']:.3f}, "
          f"distortion {summary['final_distortion']:.4f}, {len(emitted)} files)")

    # tiny sweep over both algorithms
    rows = v.run_sweep({
        "grid.rows": 4, "grid.cols": 4,
        "steps": 300, "log_interval": 100,
        "stream.kind": "circles", "stream.seed": 3,
        "seed": 42, "eval_batch": 64,
        "output_dir": tempfile.mkdtemp(prefix="vdsom_sweep_"),
    }, etas=[0.5, 1.0])
    assert len(rows) == 4
    assert {alg for alg, _, _ in rows} == {"vdsom", "dsom"}
    print("run_sweep ok:", ", ".join(f"{alg} eta={eta} d={d:.3f}" for alg, eta, d in rows))

    print("smoke test passed")


if __name__ == "__main__":
    main()
