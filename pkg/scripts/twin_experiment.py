"""CSOO / SSOO / SMOO comparison on synthetic twin data.

    python3 scripts/twin_experiment.py --seeds 0 1 2 --noise 0.05 [--distributed] [--smoo]
"""

import argparse

from hydrocal.experiments import compare_csoo_ssoo, recovery, smoo_trade_off


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--distributed", action="store_true", help="VDA on a spatially varying c_p truth")
    ap.add_argument("--smoo", action="store_true", help="also run the NSGA trade-off")
    args = ap.parse_args()

    r = recovery()
    print(f"recovery (noise-free CSOO): NSE cal {r.nse_calibration:.4f}, val {r.nse_validation:.4f}")
    print("seed  csoo_jd   ssoo_jd   ratio  csoo_jf   ssoo_jf")
    for s in args.seeds:
        c = compare_csoo_ssoo(args.noise, s, args.distributed)
        print(f"{s:4d}  {c.csoo_jd:.5f}  {c.ssoo_jd:.5f}  {c.jd_ratio:5.2f}  {c.csoo_jf:.5f}  {c.ssoo_jf:.5f}")
    if args.smoo:
        for s in args.seeds:
            t = smoo_trade_off(args.noise, s)
            print(f"SMOO seed {s}: {len(t.front)} front points, spans trade-off: {t.spans}")


if __name__ == "__main__":
    main()
