"""Computed constants, the barrier function, and region classification.

The admissible set of (lambda, beta) pairs depends on how the gradient
growth exponent r = a + b + 1 compares with p.  This demo computes the
constants bundle for each regime, prints the barrier threshold, and
classifies a small parameter table the same way the command line driver
does.
"""

import dataclasses

import numpy as np

from plaplab import (
    barrier_value,
    bundled_problem_path,
    compute_constants,
    growth_case,
    load_problem,
    region_boundary,
    region_classify,
    super_threshold,
)


def classify_table(spec, bundle, lams, betas):
    print("       " + "".join(f"beta={b:<8g}" for b in betas))
    for lam in lams:
        cells = []
        for beta in betas:
            verdict = region_classify(lam, beta, bundle, spec)
            if verdict.in_region:
                cells.append(f"M={verdict.height:<10.4g}")
            else:
                cells.append("outside     "[:12])
        print(f"  {lam:<5g}" + "".join(c.ljust(13) for c in cells))


def main():
    print("== super-threshold regime (r > p) ==")
    spec = dataclasses.replace(
        load_problem(bundled_problem_path("super")), resolution=33)
    bundle = compute_constants(spec)
    k = super_threshold(bundle, spec)
    print(f"growth case {growth_case(spec)!r}: r = {spec.r} > p = {spec.p}")
    print(f"constants: phi_sup = {bundle.phi_sup:.6f}  khat = {bundle.khat:.6f}"
          f"  gamma = {bundle.gamma:.6f}")
    print(f"admissible iff lambda^(r-p) * beta^(p-q) <= K = {k:.6f}")
    classify_table(spec, bundle, [0.25, 1.0, 4.0], [1.0, 8.0, 64.0])

    lams = np.linspace(0.2, 2.0, 4)
    pairs = region_boundary(lams, bundle, spec)
    print("boundary polyline samples (lambda, beta):")
    for lam, beta in pairs:
        print(f"  ({lam:.3f}, {beta:.3f})")

    print()
    print("== critical regime (r = p) ==")
    cspec = dataclasses.replace(
        load_problem(bundled_problem_path("critical")), resolution=33)
    cbundle = compute_constants(cspec)
    limit = 1.0 / cbundle.coeff_grad
    print(f"admissible iff beta < 1/coeff_grad = {limit:.6f}, any lambda")
    classify_table(cspec, cbundle, [0.5, 2.0], [1.0, 3.0, 4.0])

    print()
    print("== sub-threshold regime (r < p) ==")
    sspec = dataclasses.replace(
        load_problem(bundled_problem_path("sub")), resolution=33)
    sbundle = compute_constants(sspec)
    print("the whole positive quadrant is admissible; the barrier height "
          "solves Phi(M) = 1")
    for lam, beta in ((0.1, 0.1), (1.0, 1.0), (100.0, 100.0)):
        verdict = region_classify(lam, beta, sbundle, sspec)
        phi_at = barrier_value(verdict.height, lam, beta, sbundle, sspec)
        print(f"  (lambda, beta) = ({lam:g}, {beta:g}): M = "
              f"{verdict.height:.6g}, Phi(M) = {phi_at:.12f}")


if __name__ == "__main__":
    main()
