"""A complete CLI session on a tiny config, shared by the CLI and acceptance tests."""

import json
from pathlib import Path

from vipelab import cli

TINY = {
    "seed": 3,
    "workers": 2,
    "synth": {"n_poses": 60},
    "vae": {"hidden_dim": 16, "epochs": 2, "batch_size": 32, "weights": {"kl": 0.01}},
    "mapper": {"hidden_dim": 16, "epochs": 2, "batch_size": 32},
    "eval": {"ks": [1, 5]},
}


def run(*argv):
    return cli.dispatch([str(a) for a in argv])


def pipeline(root: Path) -> Path:
    """Every subcommand once, writing all outputs under ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(TINY))
    ds, vae, mapper = root / "ds", root / "vae", root / "map"
    assert run("gen-data", "--config", cfg, "--out", ds) == 0
    assert run("train-vae", "--config", cfg, "--data", ds, "--out", vae, "--augment") == 0
    assert run("train-mapper", "--config", cfg, "--data", ds, "--decoder", vae, "--out", mapper, "--augment") == 0
    assert run("eval-hit", "--config", cfg, "--mapper", mapper, "--decoder", vae, "--data", ds, "--baseline",
               "--out", root / "hits.jsonl") == 0
    assert run("eval-mpjpe", "--config", cfg, "--mapper", mapper, "--decoder", vae, "--data", ds,
               "--out", root / "mpjpe.jsonl") == 0
    query = root / "q.jsonl"
    query.write_text("".join((ds / "records.jsonl").read_text().splitlines(keepends=True)[:3]))
    assert run("lift", "--mapper", mapper, "--decoder", vae, "--in", query, "--out", root / "lifted.jsonl") == 0
    assert run("retrieve", "--config", cfg, "--mapper", mapper, "--data", ds, "--query", query, "--k", 4,
               "--out", root / "nn.jsonl") == 0
    assert run("generate", "--decoder", vae, "--embed", query, "--seed", 5, "--n-directions", 2,
               "--out", root / "gen.jsonl") == 0
    assert run("interpolate", "--decoder", vae, "--a", query, "--b", root / "lifted.jsonl", "--steps", 5,
               "--out", root / "path.jsonl") == 0
    assert run("export-viz", "--decoder", vae, "--data", ds, "--out", root / "viz.csv") == 0
    assert run("ablate", "--config", cfg, "--data", ds, "--out", root / "abl", "--no-triplet",
               "--no-canonical-rotation") == 0
    return root
