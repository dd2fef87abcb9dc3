"""Monte Carlo check of the law of large numbers under P_{mu_s}.

Samples the telescopic measure built on mu_s, then compares the trial means
of A_n phi and of the local dimension with P'(s) and the dimension formula.

    python scripts/lln_demo.py --potential data/example1.json --s 1 --n 100000 --trials 50
"""
import argparse

from multiergodic.potential import load_potential
from multiergodic.sampling import lln_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--potential", default="data/example1.json")
    ap.add_argument("--s", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=10**5)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--report", help="write the full text report here")
    args = ap.parse_args(argv)

    rep = lln_experiment(load_potential(args.potential), args.s, args.n, args.trials, args.seed, threads=args.threads)
    sm = rep.summary()
    print(f"A_n phi:   mean {sm['average_mean']:.6f}  target P'(s) {sm['average_target']:.6f}  z {sm['average_z']:+.2f}")
    print(f"local dim: mean {sm['local_dim_mean']:.6f}  target {sm['local_dim_target']:.6f}  z {sm['local_dim_z']:+.2f}")
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(rep.to_text())


if __name__ == "__main__":
    main()
