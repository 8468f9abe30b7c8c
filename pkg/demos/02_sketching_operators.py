"""Sparse sketching operators and what their parameters trade off.

An SJLT places vec_nnz sign entries in every column (m * k nonzeros total);
LessUniform places them in every row (d * k nonzeros, far fewer since
d << m).  Both preserve norms in expectation; denser operators concentrate
harder.
"""

import numpy as np

from sketchtune import apply_vector, sample_operator

d, m = 50, 5000
rng = np.random.default_rng(0)
v = rng.standard_normal(m)
v /= np.linalg.norm(v)

print(f"{'kind':>12} {'k':>4} {'nnz(S)':>8} {'mean ||Sv||^2':>14} {'std':>8}")
for kind in ("SJLT", "LessUniform"):
    for k in (1, 4, 16):
        vals = [
            np.linalg.norm(apply_vector(sample_operator(kind, d, m, k, seed=i), v)) ** 2
            for i in range(300)
        ]
        S = sample_operator(kind, d, m, k, seed=0)
        nnz = S.indices.size
        print(f"{kind:>12} {k:>4} {nnz:>8} {np.mean(vals):>14.4f} {np.std(vals):>8.4f}")

print("\nA LessUniform operator with k=m and an SJLT with k=d both densify")
print("to full sign matrices with entries of magnitude 1/sqrt(d):")
sj = sample_operator("SJLT", d=4, m=8, k=4, seed=1)
lu = sample_operator("LessUniform", d=4, m=8, k=8, seed=1)
print("  SJLT |entry|       =", np.abs(sj.values).flat[0])
print("  LessUniform |entry| =", np.abs(lu.values).flat[0])
