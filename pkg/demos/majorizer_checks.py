"""Numerical certificates for the surrogates used by the solvers.

The validator samples random anchor and test points and reports three
quantities. Tightness is the gap at the anchor. Domination is the worst
surrogate-minus-objective gap, which must stay nonnegative. The gradient
mismatch compares slopes at the anchor. A deliberately shrunk quadratic
surrogate shows what a failure looks like.

    python3 demos/majorizer_checks.py
"""

import numpy as np

from bmme.divergence import _divergence_sum, logdet_volume
from bmme.majorizer import jensen_beta_majorizer, lipschitz_majorizer, logdet_majorizer, validate_majorizer

rng = np.random.default_rng(0)
v = rng.random(6) * 3
W = rng.random((6, 3)) + 0.1


def positive(shape):
    return lambda g: g.random(shape) + 0.05


for beta in (1.0, 1.25, 1.5, 2.0):
    spec = jensen_beta_majorizer(v, W, beta=beta)
    rep = validate_majorizer(spec, lambda h, b=beta: _divergence_sum(v, W @ h, b), positive(3), rng=1)
    print(f"Jensen beta={beta}: passed={rep.passed} tightness={rep.tightness:.1e} "
          f"domination={rep.domination:.1e} slope mismatch={rep.gradient_mismatch:.1e}")

delta = 0.1
spec = logdet_majorizer(np.ones((5, 2)), delta)
rep = validate_majorizer(spec, lambda M: logdet_volume(M, delta), positive((5, 2)), rng=2)
print(f"log-det quadratic: passed={rep.passed} domination={rep.domination:.1e}")

Q = np.array([[3.0, 1.0], [1.0, 2.0]])
L = float(np.linalg.eigvalsh(Q)[-1])


def f(x):
    return 0.5 * x @ Q @ x


def grad(x):
    return Q @ x


for scale in (1.0, 0.5):
    rep = validate_majorizer(lipschitz_majorizer(f, grad, scale * L), f, lambda g: g.normal(size=2), rng=3)
    print(f"quadratic with {scale:g} L: passed={rep.passed} domination={rep.domination:.2e}")
