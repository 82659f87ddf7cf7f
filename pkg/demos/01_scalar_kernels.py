"""
The two scalar multipliers
==========================

Both safety filters reduce to one scalar, lam(a, b), where a is the
barrier slack of the desired input and b the squared size of the
correction direction. The QP multiplier has a kink where a crosses 0;
the half-Sontag multiplier is smooth and never smaller.
"""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from geocbf.scalar import lambda_hs, lambda_qp

a = np.linspace(-3, 3, 601)
for b in (0.25, 1.0, 4.0):
    qp = [lambda_qp(x, b) for x in a]
    hs = [lambda_hs(x, b) for x in a]
    plt.plot(a, qp, "--", label=f"QP, b={b}")
    plt.plot(a, hs, label=f"half-Sontag, b={b}")
plt.xlabel("a")
plt.ylabel("lambda")
plt.legend()
plt.savefig("scalar_kernels.svg")

# the gap is largest at a = 0, where lam_hs = 1/2 and lam_qp = 0
print("lam_hs(0, b) =", lambda_hs(0.0, 4.0), " lam_qp(0, b) =", lambda_qp(0.0, 4.0))

# a + b lam: the QP makes the constraint exactly tight, the smooth filter leaves slack
for x in (-2.0, 0.0, 2.0):
    print(f"a={x:+.1f}  a+b*lam_qp={x + lambda_qp(x, 1.0):.4f}  a+b*lam_hs={x + lambda_hs(x, 1.0):.4f}")
