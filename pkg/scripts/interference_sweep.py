"""Entropy timelines under increasing Gilbert-Elliott error rates."""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field

import numpy as np

from logentropy import failgen
from logentropy.ingest import record_tokens
from logentropy.ngram import train
from logentropy.timeline import score_timeline


@dataclass
class InterferenceConfig:
    seed: int = 0
    e_bad: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.45)
    order: int = 5
    window_bytes: int = 4096
    ge: dict = field(default_factory=lambda: {"p": 0.15, "r": 0.02, "e_good": 0.01})


def run(cfg: InterferenceConfig) -> list[dict]:
    spec = failgen.default_scenario(cfg.seed, "interference")
    base = failgen.generate(failgen.baseline(spec, cfg.seed + 10_000))
    model = train([record_tokens(r) for r in base.records], cfg.order)
    rows = []
    for e_bad in cfg.e_bad:
        corpus = failgen.generate(failgen.default_scenario(cfg.seed, "interference", e_bad=e_bad, **cfg.ge))
        values = np.array(score_timeline(model, corpus.windows(cfg.window_bytes)).values)
        rows.append({
            "e_bad": e_bad,
            "degradation_records": failgen.degradation_count(corpus),
            "windows": len(values),
            "quartile_means": [float(c.mean()) for c in np.array_split(values, 4)],
        })
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("e_bad  records  windows  mean entropy per quartile")
    for row in run(InterferenceConfig(seed=args.seed)):
        quarts = "  ".join(f"{v:.4f}" for v in row["quartile_means"])
        print(f"{row['e_bad']:5.2f}  {row['degradation_records']:7d}  {row['windows']:7d}  {quarts}")


if __name__ == "__main__":
    main()
