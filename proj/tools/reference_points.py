#!/usr/bin/env python3
"""Regenerate the dispatch fixtures under data/fixtures.

Requires pypower and matpowercaseframes. For each case two documents are
written:

  <case>.start.json  OPF dispatch under a uniform linear cost (sum of p_g)
  <case>.opt.json    OPF dispatch under the case's own cost

Generators are listed in file order (in-service only), powers in MW.
"""

import argparse
import copy
import json
import pathlib

import numpy as np
from matpowercaseframes import CaseFrames
from pypower.api import ppoption, runopf
from pypower.totcost import totcost

CASES = [
    "pglib_opf_case3_lmbd",
    "pglib_opf_case5_pjm",
    "pglib_opf_case14_ieee",
    "pglib_opf_case24_ieee_rts",
    "pglib_opf_case30_ieee",
    "pglib_opf_case39_epri",
    "pglib_opf_case57_ieee",
    "pglib_opf_case118_ieee",
    "case9_fixed_v",
]

OPTIONS = ppoption(
    VERBOSE=0,
    OUT_ALL=0,
    OPF_VIOLATION=1e-8,
    PDIPM_GRADTOL=1e-10,
    PDIPM_COMPTOL=1e-10,
    PDIPM_COSTTOL=1e-12,
)


def load(path):
    cf = CaseFrames(str(path))
    ppc = {
        "version": "2",
        "baseMVA": float(cf.baseMVA),
        "bus": cf.bus.values.astype(float),
        "gen": cf.gen.values.astype(float),
        "branch": cf.branch.values.astype(float),
        "gencost": cf.gencost.values.astype(float),
    }
    ppc["gen"] = ppc["gen"][ppc["gen"][:, 7] > 0]
    ppc["gencost"] = ppc["gencost"][: ppc["gen"].shape[0]]
    ppc["branch"] = ppc["branch"][ppc["branch"][:, 10] > 0]
    return ppc


def dispatch(ppc, result, cost, label):
    bus_v = {int(b[0]): b[7] for b in result["bus"]}
    gens = result["gen"]
    return {
        "schema": "feaspath.dispatch/1",
        "label": label,
        "p_mw": [round(float(g[1]), 9) for g in gens],
        "v_pu": [round(float(bus_v[int(g[0])]), 9) for g in gens],
        "cost": round(float(cost), 6),
    }


def run(case_dir, out_dir, name):
    ppc = load(case_dir / f"{name}.m")
    costs = ppc["gencost"].copy()

    uniform = copy.deepcopy(ppc)
    uniform["gencost"] = np.zeros((costs.shape[0], 7))
    uniform["gencost"][:, 0] = 2
    uniform["gencost"][:, 3] = 3
    uniform["gencost"][:, 5] = 1.0
    start = runopf(uniform, OPTIONS)
    opt = runopf(copy.deepcopy(ppc), OPTIONS)
    for tag, res in (("start", start), ("opt", opt)):
        cost = totcost(costs, res["gen"][:, 1]).sum()
        label = "uniform linear cost OPF" if tag == "start" else "OPF optimum"
        doc = dispatch(ppc, res, cost, label)
        doc["converged"] = bool(res["success"])
        path = out_dir / f"{name}.{tag}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        print(f"{name:28s} {tag:5s} success={res['success']} cost={cost:.2f}")


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", default=str(root / "data" / "cases"))
    ap.add_argument("--out", default=str(root / "data" / "fixtures"))
    ap.add_argument("names", nargs="*", default=CASES)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.names:
        run(pathlib.Path(args.cases), out, name)


if __name__ == "__main__":
    main()
