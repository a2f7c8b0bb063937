"""Memorize the five small graphs with the desk preset and report the round trip.

    python scripts/memorize.py              # plain autoencoder
    python scripts/memorize.py --vae        # variational mode, KL weight 0
"""

import argparse
import time

from regae.cli import make_split
from regae.codec import decode, encode
from regae.config import get_preset
from regae.datasets import memorization_set
from regae.graph import Graph, canonical_order, to_patch_grid
from regae.training import full_loss, train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--vae", action="store_true")
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = get_preset("desk").replace(max_epochs=args.epochs, seed=args.seed)
    if args.vae:
        cfg = cfg.replace(vae=True, kl_weight=0.0)
    graphs = memorization_set()
    t0 = time.process_time()
    params, hist = train(make_split(cfg, graphs), cfg)
    cpu = time.process_time() - t0
    for rec in hist[:: max(1, len(hist) // 10)]:
        print(f"epoch {rec['epoch']:5d}  train {rec['train_loss']:.5f}  valid {rec['valid_loss']:.5f}")
    cgs = [canonical_order(g) for g in graphs]
    print(f"final full-graph loss {full_loss(cgs, params, cfg):.6f}  cpu {cpu:.1f}s")
    for g in cgs:
        res = decode(encode(to_patch_grid(g.graph, cfg.l), params).root.data, params, max_blocks=10)
        ok = res.n_hat == g.n and Graph.from_adjacency(res.A_hat) == g.graph
        print(f"n={g.n} edges={g.graph.num_edges}  n_hat={res.n_hat}  exact={ok}")


if __name__ == "__main__":
    main()
