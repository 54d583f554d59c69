#!/usr/bin/env python3
"""Deterministic random sequential benchmarks in BENCH format.

Usage: gen_synth.py NAME INPUTS OUTPUTS FLOPS GATES SEED > NAME.bench
"""
import random
import sys

KINDS = ["AND", "NAND", "OR", "NOR", "XOR", "NOT", "AND", "NOR"]


def generate(name, n_in, n_out, n_ff, n_gates, seed):
    rng = random.Random(seed)
    ins = [f"I{i}" for i in range(n_in)]
    ffs = [f"F{i}" for i in range(n_ff)]
    gates = []
    pool = ins + ffs
    unused = set(pool)
    for g in range(n_gates):
        kind = rng.choice(KINDS)
        arity = 1 if kind == "NOT" else rng.choice([2, 2, 2, 3])
        # bias towards recent signals to get depth, and consume unused ones
        cands = []
        if unused and rng.random() < 0.6:
            cands.append(rng.choice(sorted(unused)))
        while len(cands) < arity:
            if rng.random() < 0.5 and len(pool) > len(ins) + len(ffs):
                s = rng.choice(pool[-12:])
            else:
                s = rng.choice(pool)
            if s not in cands:
                cands.append(s)
        out = f"N{g}"
        gates.append((out, kind, cands))
        for c in cands:
            unused.discard(c)
        pool.append(out)
        unused.add(out)
    comb = [g[0] for g in gates]
    tail = comb[len(comb) // 3:]
    d_pins = rng.sample(tail, n_ff)
    outs = rng.sample([c for c in tail if c not in d_pins], n_out)
    lines = [f"# {name}: synthetic, seed {seed}"]
    lines += [f"INPUT({i})" for i in ins]
    lines += [f"OUTPUT({o})" for o in outs]
    lines.append("")
    lines += [f"{f} = DFF({d})" for f, d in zip(ffs, d_pins)]
    lines.append("")
    lines += [f"{o} = {k}({', '.join(c)})" for o, k, c in gates]
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    name, n_in, n_out, n_ff, n_gates, seed = sys.argv[1:7]
    sys.stdout.write(generate(name, int(n_in), int(n_out), int(n_ff), int(n_gates), int(seed)))
