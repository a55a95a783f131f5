"""Independent reference values frozen into the unit tests.

Inputs are closed-form (no RNG) so the C++ tests can rebuild them exactly.
Run: PYTHONPATH=<pypower> python3 golden.py
"""
import json
import sys
from pathlib import Path

import numpy as np
import torch
from scipy.optimize import fsolve

torch.set_default_dtype(torch.float64)
ROOT = Path(__file__).resolve().parents[2]
out = {}


def fill(rows, cols, a, b):
    """x[i, j] = a * sin(b + 0.7 i + 1.3 j)."""
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return a * np.sin(b + 0.7 * i + 1.3 * j)


# -- 3-bus admittance ----------------------------------------------------------
y = 1.0 / complex(0.01, 0.1)
Y = np.zeros((3, 3), complex)
for f, t in [(0, 1), (1, 2)]:
    Y[f, f] += y
    Y[t, t] += y
    Y[f, t] -= y
    Y[t, f] -= y
out["ybus3_g"] = Y.real.tolist()
out["ybus3_b"] = Y.imag.tolist()

# -- term-by-term polar injections ----------------------------------------------
v = np.array([1.0, 0.98, 0.97])
th = np.array([0.0, -0.02, -0.05])
G, B = Y.real, Y.imag
p = np.zeros(3)
q = np.zeros(3)
for i in range(3):
    for k in range(3):
        d = th[i] - th[k]
        p[i] += v[i] * v[k] * (G[i, k] * np.cos(d) + B[i, k] * np.sin(d))
        q[i] += v[i] * v[k] * (G[i, k] * np.sin(d) - B[i, k] * np.cos(d))
out["inj3_p"] = p.tolist()
out["inj3_q"] = q.tolist()

# -- 3-bus solve (slack 0, PQ loads 0.5+0.2j and 0.3+0.1j) and perturbed mismatch --
p_spec = np.array([-0.5, -0.3])
q_spec = np.array([-0.2, -0.1])


def pq_of(vv, tt):
    V = vv * np.exp(1j * tt)
    s = V * np.conj(Y @ V)
    return s.real, s.imag


def resid(z):
    tt = np.array([0.0, z[0], z[1]])
    vv = np.array([1.0, z[2], z[3]])
    pp, qq = pq_of(vv, tt)
    return np.r_[pp[1:] - p_spec, qq[1:] - q_spec]


z = fsolve(resid, [0, 0, 1, 1], xtol=1e-14)
out["solve3_theta"] = [0.0, z[0], z[1]]
out["solve3_v"] = [1.0, z[2], z[3]]
z_pert = z.copy()
z_pert[0] += 0.01
out["mismatch3_perturbed"] = resid(z_pert).tolist()

# -- dense layer 3x4 (torch) ---------------------------------------------------
W = fill(3, 4, 0.5, 0.1)
b = fill(3, 1, 0.2, 0.4).ravel()
x = fill(4, 2, 1.0, 0.9)
lin = torch.nn.Linear(4, 3)
with torch.no_grad():
    lin.weight.copy_(torch.tensor(W))
    lin.bias.copy_(torch.tensor(b))
xt = torch.tensor(x.T, requires_grad=True)
yt = torch.tanh(lin(xt))
out["dense_tanh_out"] = yt.detach().numpy().T.tolist()
up = fill(3, 2, 1.0, 2.0)
yt.backward(torch.tensor(up.T))
out["dense_grad_w"] = lin.weight.grad.numpy().tolist()
out["dense_grad_b"] = lin.bias.grad.numpy().tolist()
out["dense_grad_x"] = xt.grad.numpy().T.tolist()

# -- bilinear decoder forward (explicit outer products) -------------------------
n = 4
wg = fill(n, n, 1.5, 0.3)
wb = fill(n, n, 2.0, 1.1)
bp = fill(n, 1, 0.1, 0.5).ravel()
bq = fill(n, 1, 0.1, 1.5).ravel()
mu = 1.0 + fill(n, 1, 0.05, 0.2).ravel()
om = fill(n, 1, 0.1, 2.2).ravel()
M1 = np.outer(mu, mu) + np.outer(om, om)
M2 = np.outer(om, mu) - np.outer(mu, om)
S1 = M1 * wg + M2 * wb
S2 = M2 * wg - M1 * wb
out["bnn_p"] = (S1.sum(1) + bp).tolist()
out["bnn_q"] = (S2.sum(1) + bq).tolist()
A = np.eye(n)
for i in range(n - 1):
    A[i, i + 1] = A[i + 1, i] = 1
out["tpbnn_p"] = ((S1 * A).sum(1) + bp).tolist()
out["tpbnn_q"] = ((S2 * A).sum(1) + bq).tolist()

# bilinear gradients through torch autograd, loss = sum(gp*y_p + gq*y_q)
twg = torch.tensor(wg, requires_grad=True)
twb = torch.tensor(wb, requires_grad=True)
tmu = torch.tensor(mu, requires_grad=True)
tom = torch.tensor(om, requires_grad=True)
tM1 = torch.outer(tmu, tmu) + torch.outer(tom, tom)
tM2 = torch.outer(tom, tmu) - torch.outer(tmu, tom)
gp = fill(n, 1, 1.0, 0.6).ravel()
gq = fill(n, 1, 1.0, 1.7).ravel()
yp = (tM1 * twg + tM2 * twb).sum(1)
yq = (tM2 * twg - tM1 * twb).sum(1)
(torch.tensor(gp) @ yp + torch.tensor(gq) @ yq).backward()
out["bnn_grad_wg"] = twg.grad.numpy().tolist()
out["bnn_grad_wb"] = twb.grad.numpy().tolist()
out["bnn_grad_mu"] = tmu.grad.numpy().tolist()
out["bnn_grad_omega"] = tom.grad.numpy().tolist()

# -- losses --------------------------------------------------------------------
pred = fill(5, 3, 1.0, 0.3)
tgt = fill(5, 3, 0.8, 1.9)
out["sq_loss"] = float(((pred - tgt) ** 2).sum(0).mean())
sp = fill(4, 3, 1.0, 0.8)
st = fill(4, 3, 0.5, 2.4)
out["multitask_loss"] = 1.0 * out["sq_loss"] + 0.3 * float(((sp - st) ** 2).sum(0).mean())

# -- Adam 10-step trace (torch) -------------------------------------------------
p0 = torch.tensor([0.1 * j for j in range(5)], requires_grad=True)
opt = torch.optim.Adam([p0], lr=1e-2, betas=(0.9, 0.999), eps=1e-8)
for t in range(10):
    opt.zero_grad()
    p0.grad = torch.tensor([np.cos(t + j) for j in range(5)])
    opt.step()
out["adam_trace"] = p0.detach().numpy().tolist()

# -- metrics on a 100 x 10 instance ----------------------------------------------
mt = fill(100, 10, 1.0, 0.25) + 0.05
mp = mt + fill(100, 10, 0.1, 3.3)
err = mp - mt
ape = np.abs(err / mt) * 100
out["metrics_rmse"] = float(np.sqrt((err ** 2).mean()))
out["metrics_mae"] = float(np.abs(err).mean())
out["metrics_ape_q"] = {str(qq): float(np.percentile(ape, qq * 100)) for qq in (0.1, 0.5, 0.9, 0.99)}

# -- IEEE 57: branch-scan pair count, Ybus and base-case solve ---------------------
sys.path.insert(0, "/tmp/pp")
from pypower.case57 import case57
from pypower.ext2int import ext2int
from pypower.makeYbus import makeYbus
from pypower.runpf import runpf
from pypower.ppoption import ppoption

ppc = ext2int(case57())
pairs = {tuple(sorted((int(r[0]), int(r[1])))) for r in ppc["branch"]}
out["ieee57_offdiag_nnz"] = 2 * len(pairs)
Ybus, _, _ = makeYbus(ppc["baseMVA"], ppc["bus"], ppc["branch"])
Yd = Ybus.toarray()
out["ieee57_abs_g_sum"] = float(np.abs(Yd.real).sum())
out["ieee57_abs_b_sum"] = float(np.abs(Yd.imag).sum())
res, ok = runpf(case57(), ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-10))
out["ieee57_vm"] = {str(k): float(res["bus"][k - 1, 7]) for k in (10, 30, 57)}
out["ieee57_va_deg"] = {str(k): float(res["bus"][k - 1, 8]) for k in (10, 30, 57)}

# -- capacity arithmetic ----------------------------------------------------------
pmax = 0.0
in_gen = False
for line in (ROOT / "data" / "ieee57.case").read_text().splitlines():
    s = line.strip()
    if not s or s.startswith("#"):
        continue
    if s.split()[0] in ("BUS", "BRANCH", "GEN", "BASEMVA"):
        in_gen = s == "GEN"
        continue
    if in_gen:
        pmax += float(s.split()[1])
out["ieee57_target_demand_pu"] = 0.9 * pmax / 100.0

json.dump(out, sys.stdout, indent=1)
