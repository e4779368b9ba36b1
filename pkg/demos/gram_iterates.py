"""
What the un-normalized iterates converge to
===========================================

Once the subspace has converged, write U(t) = V1 Phi(t) with V1 the top-k
eigenvectors. One Gram-inverse step maps Phi to Lambda^{-1} Phi^{-T}, so two
steps return to Phi: the iterates alternate between two matrices instead
of settling. U^T U therefore depends on the starting features and is not
Lambda^{-1} in general. What is fixed is the product of consecutive
iterates, Phi(t+1) Phi(t)^T = Lambda^{-1}.
"""

import numpy as np

from powerembed import power_iterates, subspace_error, sym_eig

rng = np.random.default_rng(0)
n, k = 100, 3
Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
lam = np.concatenate([[4.0, 2.5, 1.5], rng.uniform(0.0, 0.5, n - k)])
S = (Q * lam) @ Q.T
S = (S + S.T) / 2

U = power_iterates(S, rng.standard_normal((n, k)), 201)
V1 = sym_eig(S).top(k)

print("angle to top-3 eigenspace:", subspace_error(U[200], V1))
print("diag of U^T U at t=200:", np.round(np.diag(U[200].T @ U[200]), 4))
print("diag of U^T U at t=201:", np.round(np.diag(U[201].T @ U[201]), 4))
print("1 / lambda:            ", np.round(1 / lam[:k], 4))

cross = (V1.T @ U[201]) @ (V1.T @ U[200]).T
print("Phi(201) Phi(200)^T:\n", np.round(cross, 10))
