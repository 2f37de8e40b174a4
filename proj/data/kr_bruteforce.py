# Brute-force KR value of a small atomic instance on a box: enumerate every vertex of the
# dual polytope |phi_i - phi_j| <= |x_i - x_j|, |phi_i| <= dist(x_i, boundary) and keep the best.
# Usage: python3 kr_bruteforce.py instance.json
import itertools, json, sys
import numpy as np
inst = json.load(open(sys.argv[1]))
x = [np.array(a["x"]) for a in inst["atoms"]]; w = np.array([a["w"] for a in inst["atoms"]])
lo, hi = np.array(inst["domain"]["lo"]), np.array(inst["domain"]["hi"])
d = [min(np.min(p - lo), np.min(hi - p)) for p in x]
k = len(x)
rows, rhs = [], []
for i in range(k):
    e = np.zeros(k); e[i] = 1; rows += [e, -e]; rhs += [d[i], d[i]]
    for j in range(k):
        if i != j:
            e = np.zeros(k); e[i] = 1; e[j] = -1; rows.append(e); rhs.append(np.linalg.norm(x[i] - x[j]))
A, b = np.array(rows), np.array(rhs)
best = -np.inf
for sel in itertools.combinations(range(len(b)), k):
    M = A[list(sel)]
    if abs(np.linalg.det(M)) < 1e-12: continue
    phi = np.linalg.solve(M, b[list(sel)])
    if np.all(A @ phi <= b + 1e-12): best = max(best, w @ phi)
print(repr(float(best)))
