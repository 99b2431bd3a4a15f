"""Print the robust-confidence grid with p = 5% of N next to the reference percentages."""

from christoffel_reach.bounds import robust_confidence

REFERENCE = {
    100: (33, 51, 68, 96),
    500: (10, 42, 77, 99.99),
    1000: (3, 37, 84, 99.99),
    2000: (0.4, 31, 92, 99.99),
}
EPS = (0.04, 0.05, 0.06, 0.10)


def main():
    print(f"{'N':>5} {'p':>4}  " + "  ".join(f"eps={e:<5g} (ref)" for e in EPS))
    for N, row in REFERENCE.items():
        p = N // 20
        cells = "  ".join(f"{100 * robust_confidence(N, p, e):8.3f} ({v:>5})" for e, v in zip(EPS, row))
        print(f"{N:>5} {p:>4}  {cells}")


if __name__ == "__main__":
    main()
