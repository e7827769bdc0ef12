"""Evaluate the independent oracles in tests/oracles.py and freeze their outputs.

Run from the repository root:  python3 scripts/freeze_oracles.py
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402


def main() -> None:
    frozen = {}
    frozen["kron_yy"] = {
        "re": oracles.kron_loop(oracles.SY, oracles.SY).real.tolist(),
        "im": oracles.kron_loop(oracles.SY, oracles.SY).imag.tolist(),
    }
    frozen["depolarizing_choi_concurrence"] = {
        f"{p:.1f}": oracles.concurrence_eig(oracles.choi_loop(oracles.depolarizing_kraus(p), 2))
        for p in np.round(np.arange(0, 1.01, 0.2), 10)
    }
    frozen["amplitude_damping_choi_concurrence"] = {
        f"{g:.2f}": oracles.concurrence_eig(oracles.choi_loop(oracles.amplitude_damping_kraus(g), 2))
        for g in [0.1, 0.2, 0.3, 0.36, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    }
    frozen["gk_05_03_02_k3"] = float(oracles.gk_mp([0.5, 0.3, 0.2], 3))
    frozen["theorem3_n0_d2"] = float(oracles.theorem3_mp(0.5, 0, 2))
    frozen["theorem3_k08_n10_d2"] = float(oracles.theorem3_mp(0.8, 10, 2))
    n = 0
    while oracles.theorem3_mp(0.5, n, 2) >= 1e-6:
        n += 1
    frozen["theorem3_first_n_below_1e-6"] = n
    f, prob = oracles.distill_loop(0.8, 0.8)
    frozen["distill_08_08"] = {"fidelity": f, "success_prob": prob}
    frozen["swap_09_09"] = oracles.swap_loop(0.9, 0.9)
    frozen["swap_07_06"] = oracles.swap_loop(0.7, 0.6)
    grid = oracles.scaling_exact(0.1, [4, 16, 64, 256], [1, 2, 4, 8, 16, 32])
    frozen["scaling_m_min_p01"] = {str(k): v for k, v in grid.items()}
    none_cut = 1
    f0 = 1 - 0.75 * 0.1
    end = f0
    while end > 0.5:
        none_cut += 1
        end = end * f0 + (1 - end) * (1 - f0) / 3
    frozen["no_distill_first_failing_n_p01"] = none_cut
    # the residual depends on the Kraus representation; both are frozen
    frozen["kl_depolarizing_03_computational"] = oracles.kl_residual_loop(
        oracles.depolarizing_canonical_kraus(2, 0.3), np.eye(2)
    )
    frozen["kl_depolarizing_03_computational_pauli_kraus"] = oracles.kl_residual_loop(
        oracles.depolarizing_kraus(0.3), np.eye(2)
    )
    rng = np.random.default_rng(2024)
    coeff = np.diag(np.sqrt([0.5, 0.3, 0.2])).astype(complex)
    frozen["k_schmidt_fidelity_numeric_05_03_02_k2"] = oracles.max_overlap_rank_k(coeff, 2, 20, rng)
    frozen["isotropic_negativity_threshold"] = 2 / 3
    frozen["werner_fidelity_boundary_p"] = 2 / 3
    frozen["min_parallel_p01_diff_100_10"] = math.log(100) / math.log(10) - math.log(10) / math.log(10)
    out = ROOT / "tests" / "data" / "frozen.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(frozen, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
