"""Compare small-separation Lyapunov estimates with the analytic top exponent.

    python scripts/lyapunov_check.py --paths 4000 --seed 2026
"""

import argparse

import numpy as np

from isoflow import iouf, sphere
from isoflow.montecarlo import SimConfig, estimate_top_lyapunov


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=4000)
    p.add_argument("--seed", type=int, default=2026)
    args = p.parse_args()

    G = iouf.gaussian_covariance()
    cases = [
        ("sphere d=3 a2=1", sphere.SphereModel(3, (0, 1)), 1e-4 * np.pi, 2.0),
        ("sphere d=3 b2=1", sphere.SphereModel(3, (), (0, 1)), 1e-6 * np.pi, 2.0),
        ("iouf d=4 c=2", iouf.OUFlowModel(4, 2.0, G), 1e-4, 5.0),
        ("iouf d=4 c=1", iouf.OUFlowModel(4, 1.0, G), 3e-7, 10.0),
    ]
    for name, model, r0, T in cases:
        if isinstance(model, sphere.SphereModel):
            lam, spec = sphere.lyapunov_spectrum(model)[0], sphere.distance_diffusion(model)
        else:
            lam, spec = iouf.top_lyapunov(model).value, iouf.distance_diffusion(model)
        est = estimate_top_lyapunov(spec, r0, SimConfig(1e-3, T, args.paths, args.seed))
        print(f"{name:18s} lambda1 = {lam:+.4f}  estimate {est.mean:+.4f} "
              f"[{est.ci_lo:+.4f}, {est.ci_hi:+.4f}]  excluded {est.excluded_fraction:.3f}")


if __name__ == "__main__":
    main()
