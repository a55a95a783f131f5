#!/usr/bin/env python3
"""Convert a MATPOWER/PYPOWER case dictionary into the plain-text case format.

Usage: convert_matpower.py <module.function> <output.case>
   e.g. convert_matpower.py pypower.case57.case57 data/ieee57.case

Column mapping (MATPOWER -> case file):
  bus:    BUS_I, BUS_TYPE, PD, QD, GS, BS, VM (or gen VG at PV/slack), VA
  branch: F_BUS, T_BUS, BR_R, BR_X, BR_B, TAP (0 -> 1), SHIFT   (out-of-service rows dropped)
  gen:    GEN_BUS, PMAX, PG                                    (out-of-service rows dropped)
Units are left as MATPOWER stores them (MW, MVAr, degrees); the parser converts to p.u.
"""
import importlib
import sys


def fmt(v):
    return f"{v:.9g}"


def main():
    mod_name, fn_name = sys.argv[1].rsplit(".", 1)
    ppc = getattr(importlib.import_module(mod_name), fn_name)()
    bus, branch, gen = ppc["bus"], ppc["branch"], ppc["gen"]
    vg = {int(g[0]): g[5] for g in gen if g[7] > 0}
    out = [f"# converted from {sys.argv[1]}", f"BASEMVA {fmt(ppc['baseMVA'])}", "BUS",
           "# id type Pd Qd Gs Bs Vset ThetaSet"]
    for b in bus:
        bid, btype = int(b[0]), int(b[1])
        vset = vg.get(bid, b[7]) if btype in (2, 3) else b[7]
        out.append(" ".join([str(bid), str(btype)] + [fmt(v) for v in (b[2], b[3], b[4], b[5], vset, b[8])]))
    out += ["BRANCH", "# from to r x b tap shift"]
    for br in branch:
        if br[10] <= 0:
            continue
        tap = br[8] if br[8] != 0 else 1.0
        out.append(" ".join([str(int(br[0])), str(int(br[1]))] + [fmt(v) for v in (br[2], br[3], br[4], tap, br[9])]))
    out += ["GEN", "# bus Pmax Pg"]
    for g in gen:
        if g[7] <= 0:
            continue
        out.append(" ".join([str(int(g[0])), fmt(g[8]), fmt(g[1])]))
    with open(sys.argv[2], "w") as f:
        f.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
