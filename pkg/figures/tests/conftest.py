"""CSV synthesis helpers shared by the figure tests."""

import math

GRID_HEADER = "series,m,x,mean,variance,lower,upper,truth"

RESULTS_HEADER = ("n,d,alpha,gamma,kernel,design,m,delta,coverage,length_mean,"
                  "length_sd,rmse,nlpd_mean,nlpd_sd,seed")


def make_grid_csv(path, series_specs, points=21):
    """Write a synthetic grid CSV; series_specs maps label -> (m, half_width)."""
    lines = [GRID_HEADER]
    for label, (m, half) in series_specs.items():
        for i in range(points):
            x = i / (points - 1)
            mean = math.sin(3 * x)
            truth = abs(x - 0.5)
            lines.append(f"{label},{m},{x!r},{mean!r},{(half / 1.96) ** 2!r},"
                         f"{mean - half!r},{mean + half!r},{truth!r}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def table1_rows():
    """A complete synthetic table1 cell set: 4 blocks x 3 kernels x {sparse, full}."""
    blocks = [("regular_grid", 1000, 1.0, 0.5, 178),
              ("regular_grid", 1000, 0.5, 0.5, 316),
              ("uniform", 500, 1.0, 0.5, 106),
              ("uniform", 500, 0.3, 0.5, 244)]
    rows = []
    for design, n, alpha, gamma, m_star in blocks:
        for k, kernel in enumerate(("rbm", "matern", "se")):
            for m in (m_star, n):
                cov = 0.98 - 0.05 * k
                rows.append(f"{n},1,{alpha},{gamma},{kernel},{design},{m},0.1,"
                            f"{cov},0.41,{0.02 if design == 'uniform' else 0.0},"
                            f"0.09,-0.9,0.21,1234")
    return rows


def make_table1_csv(path, drop=None):
    rows = table1_rows()
    if drop is not None:
        rows = [r for r in rows if drop not in r]
    path.write_text("\n".join([RESULTS_HEADER] + rows) + "\n")
    return str(path)
