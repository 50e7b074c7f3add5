#!/usr/bin/env python3
"""Print the full-scale (q, n, width, params) grids for the three reference
fixed-ratio families, generated from their anchors.

These are the reference grids the plan generator is checked against; the
desk-scale demo in run_scaling_demo.py uses a smaller budget and q list.
"""

from donlab.scaling import architecture_params, make_plan, size_architecture

FAMILIES = [
    ("q / sqrt(n) fixed", (5, 10000), 0.5, [5, 10, 15, 20, 25, 30, 35, 40, 45, 50]),
    ("q / n^(2/3) fixed", (10, 31623), 2.0 / 3.0, [10, 15, 20, 25, 30, 35, 40, 45, 50]),
    ("q / n^(1/6) fixed", (6, 11650), 1.0 / 6.0, [6, 8, 10, 12]),
]


def main():
    target = 18010
    for name, anchor, exponent, q_list in FAMILIES:
        print(f"== {name} (anchor q0={anchor[0]}, n0={anchor[1]}, "
              f"target {target} params)")
        print(f"{'q':>4} {'n':>9} {'width':>6} {'params':>7}")
        for q, n in make_plan(anchor, q_list, exponent):
            w = size_architecture(target, q)
            print(f"{q:>4} {n:>9} {w:>6} {architecture_params(w, q):>7}")
        print()


if __name__ == "__main__":
    main()
