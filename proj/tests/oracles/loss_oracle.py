#!/usr/bin/env python3
"""High-precision reference values for the three SSL losses.

Evaluates the cross-entropy, cross-set contrastive and inverse focal losses
term by term with mpmath at 60 significant digits on random micro-batches,
and writes inputs plus expected values to tests/data/loss_oracle.json.
"""

import json
import random
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60


def cos_tau(u, v, tau):
    dot = mp.fsum(mp.mpf(a) * mp.mpf(b) for a, b in zip(u, v))
    nu = mp.sqrt(mp.fsum(mp.mpf(a) ** 2 for a in u))
    nv = mp.sqrt(mp.fsum(mp.mpf(b) ** 2 for b in v))
    return dot / (mp.mpf(tau) * nu * nv)


def loss_bc(sn, sa):
    n = len(sn)
    return -mp.fsum(mp.log(mp.mpf(r[0])) for r in sn) / n - mp.fsum(mp.log(mp.mpf(r[1])) for r in sa) / n


def loss_if(sn, sa, gamma):
    n = len(sn)
    g = mp.mpf(gamma)
    t0 = mp.fsum(mp.e ** (g * mp.mpf(r[0])) * mp.log(mp.mpf(r[0])) for r in sn) / n
    t1 = mp.fsum(mp.e ** (g * mp.mpf(r[1])) * mp.log(mp.mpf(r[1])) for r in sa) / n
    return -t0 - t1


def loss_cl(zn, za, tau):
    n = len(zn)
    total = mp.mpf(0)
    for i in range(n):
        inner = mp.mpf(0)
        for j in range(n):
            if j == i:
                continue
            pos = mp.e ** cos_tau(zn[i], zn[j], tau)
            neg = mp.fsum(mp.e ** cos_tau(zn[i], za[k], tau) for k in range(n))
            l_ij = -mp.log(pos / (pos + neg))
            pos_t = mp.e ** cos_tau(za[i], za[j], tau)
            neg_t = mp.fsum(mp.e ** cos_tau(za[i], zn[k], tau) for k in range(n))
            lt_ij = -mp.log(pos_t / (pos_t + neg_t))
            inner += l_ij + lt_ij
        total += inner / (2 * n)
    return total / n


def softmax_row(rng):
    a = rng.uniform(-3.0, 3.0)
    p = 1.0 / (1.0 + pow(2.718281828459045, -a))
    return [1.0 - p, p]


def make_case(rng):
    n = rng.randint(1, 6)
    d = rng.randint(1, 8)
    def zrow():
        row = [rng.uniform(0.0, 2.0) if rng.random() > 0.2 else 0.0 for _ in range(d)]
        if all(v == 0.0 for v in row):
            row[rng.randrange(d)] = rng.uniform(0.1, 2.0)
        return row
    case = {
        "z_normal": [zrow() for _ in range(n)],
        "z_aug": [zrow() for _ in range(n)],
        "s_normal": [softmax_row(rng) for _ in range(n)],
        "s_aug": [softmax_row(rng) for _ in range(n)],
        "tau": rng.uniform(0.1, 1.5),
        "gamma": rng.uniform(0.0, 2.0),
        "lambda_bc": rng.uniform(0.0, 2.0),
        "lambda_cl": rng.uniform(0.0, 2.0),
        "lambda_if": rng.uniform(0.0, 2.0),
    }
    return case


def evaluate(case):
    bc = loss_bc(case["s_normal"], case["s_aug"])
    cl = loss_cl(case["z_normal"], case["z_aug"], case["tau"])
    inv = loss_if(case["s_normal"], case["s_aug"], case["gamma"])
    w = [mp.mpf(case["lambda_bc"]), mp.mpf(case["lambda_cl"]), mp.mpf(case["lambda_if"])]
    total = (w[0] * bc + w[1] * cl + w[2] * inv) / (w[0] + w[1] + w[2])
    return {"l_bc": float(bc), "l_cl": float(cl), "l_if": float(inv), "l_total": float(total)}


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "loss_oracle.json"
    rng = random.Random(20240517)
    cases = []
    for _ in range(50):
        case = make_case(rng)
        case["expected"] = evaluate(case)
        cases.append(case)
    scalars = {
        "bc_two_rows": float(-(mp.log(mp.mpf("0.9")) + mp.log(mp.mpf("0.8"))) / 2 - (mp.log(mp.mpf("0.7")) + mp.log(mp.mpf("0.6"))) / 2),
        "bc_half": float(2 * mp.log(2)),
        "if_half_gamma1": float(2 * mp.e ** mp.mpf("0.5") * mp.log(2)),
        "cl_orthogonal_term": float(-mp.log(mp.e ** 2 / (mp.e ** 2 + 2))),
        "cl_orthogonal_n2": float(loss_cl([[1.0, 0.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]], 0.5)),
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"cases": cases, "scalars": scalars}, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {out}")


if __name__ == "__main__":
    main()
