"""Problem files, the expression language, and hypothesis validation.

Shows the arithmetic expression parser, the plain-text problem file format,
and the sampled validation of the growth hypotheses that every driver runs
before touching a solver.
"""

import numpy as np

from plaplab import (
    ProblemSpec,
    bundled_problem_path,
    evaluate_on,
    list_bundled_problems,
    load_problem,
    parse,
    validate_hypotheses,
)


def main():
    print("== the expression language ==")
    for text in ("2 ^ 3 ^ 2", "-3 ^ 2", "(1 + x1) * exp(-u)",
                 "u ^ (q - 1) * min(1, gnorm)"):
        tree = parse(text)
        print(f"  {text!r:40s} prints back as {str(tree)!r}")
    bindings = {"x1": np.linspace(0.0, 1.0, 5), "u": 2.0, "q": 1.5,
                "gnorm": 0.5}
    vals = evaluate_on(parse("u ^ (q - 1) * min(1, gnorm) + 0 * x1"), bindings)
    print(f"  evaluated on 5 nodes: {np.round(vals, 4)}")

    print()
    print("== bundled problem files ==")
    for name in list_bundled_problems():
        spec = load_problem(bundled_problem_path(name))
        shape = "x".join(str(n) for n in spec.resolution)
        print(f"  {name:10s} p={spec.p}  q={spec.q}  r=a+b+1={spec.r}  "
              f"grid {shape}")

    print()
    print("== one file in detail ==")
    path = bundled_problem_path("sub")
    print(path.read_text())

    print("== validating the growth hypotheses ==")
    spec = load_problem(path)
    report = validate_hypotheses(spec)
    print(f"  {path.name}: {report.summary()}")

    bad = ProblemSpec(p=2.0, q=1.5, a=0.5, b=0.5,
                      omega1="1", omega2="1", omega3="1",
                      h="0.5 * u ^ (q - 1)", f="0",
                      extents=[(0.0, 1.0)], resolution=33)
    report = validate_hypotheses(bad)
    print(f"  h = u^(q-1)/2 under omega1 = 1: {report.summary()}")
    print("(the lower growth bound fails, so no solver ever sees this spec)")


if __name__ == "__main__":
    main()
