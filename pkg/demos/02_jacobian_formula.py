"""Average the defect count over offsets and recover the degree.

Integrating the signed number of defects of u - y over all offsets y, and
dividing by the area of the unit disk, gives the winding number of u along
the boundary. Here the Monte-Carlo estimate is compared with that degree for
fields of degree one to three.
"""
from defectchains.field import degree_n
from defectchains.reports import jacobian_integral_check

for n in (1, 2, 3):
    u = degree_n(n, 32)
    for mode in ("auto", "pl"):
        rep = jacobian_integral_check(u, 400, seed=n, interpolation=mode)
        print(f"degree {n} ({mode:4s}): estimate {rep.estimate:.4f} +- {rep.stderr:.4f}, "
              f"boundary degree {rep.comparison}")
