"""Size of the linearization remainder nu = U - U0 - V against the drift amplitude."""

import numpy as np

from lipd.forward import NONLINEAR_GRID, DriftPerturbation, bump, linearization_residual
from lipd.model import ModelParams


def main():
    params = ModelParams()
    amps = (0.2, 0.1, 0.05, 0.025, 0.0125)
    rows = [linearization_residual(DriftPerturbation(bump(NONLINEAR_GRID, 0.5, 1.0, a), 1.0), params) for a in amps]
    print("amplitude  |f|        |V|        |nu|       |nu|/|V|")
    for a, r in zip(amps, rows):
        print(f"{a:<10g} {r.norm_f:<10.3e} {r.norm_V:<10.3e} {r.norm_nu:<10.3e} {r.norm_nu / r.norm_V:.4f}")
    slope = np.polyfit(np.log([r.norm_f for r in rows]), np.log([r.norm_nu for r in rows]), 1)[0]
    print(f"fitted exponent of |nu| against |f|: {slope:.3f}")


if __name__ == "__main__":
    main()
