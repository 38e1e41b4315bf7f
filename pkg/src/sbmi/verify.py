"""Deterministic self-check suite behind the verify subcommand.

Each check exercises an assertable invariant of the library at desk
scale: closed-form identities, agreement between independent engines,
and the structural properties the estimators are supposed to carry
(Nishimori symmetry, monotone drift response, nonnegative remainders).
The report contains no timestamps or timings, so two runs with the
same seed produce byte-identical output.
"""

import math
from typing import List, NamedTuple

import numpy as np

from .exact import (
    child_seed,
    exact_mi_tiny,
    gibbs_report,
    hamiltonian,
    mi_via_free_energy,
)
from .ensemble import ensemble_moments
from .interpolation import (
    EstimatorConfig,
    G_FUNCTIONS,
    U_LAWS,
    approx_ibp_check,
    bracket_derivative_gap,
    channel_gap_identity,
    edge_relaxed_log_z,
    gibbs_edge_ibp_residual,
    liouville_monotonicity,
    solve_R_star,
    sum_rule_audit,
)
from .mcmc import McmcConfig, mcmc_brackets, ti_mutual_information, ti_t_grid
from .model import ModelParams, params_from_channel
from .replica import minimize_psi, psi, state_evolution
from .sampling import sample_instance, triu_index
from .serialize import canonical_json, render_float


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


def _num(x):
    return render_float(float(x))


def _check_model(seed) -> List[Check]:
    out = []
    params = params_from_channel(10, 0.3, 0.4, 1.5)
    rec = params.to_record()
    back = ModelParams.from_record(rec)
    out.append(Check("model record round-trip",
                     back.to_record() == rec, "fields match"))
    ab = params.alphabet
    probs = [params.edge_probability(a, b, t)
             for a in (ab.x1, ab.x2) for b in (ab.x1, ab.x2)
             for t in (0.0, 0.5, 1.0)]
    ok = all(0.0 < p < 1.0 for p in probs)
    out.append(Check("edge probabilities inside (0, 1)", ok,
                     f"min {_num(min(probs))} max {_num(max(probs))}"))
    lam_err = abs(params.lambda_n - 1.5)
    out.append(Check("lambda_n reconstruction", lam_err < 1e-12,
                     f"err {_num(lam_err)}"))
    return out


def _check_replica(seed) -> List[Check]:
    out = []
    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        for r in (0.5, 0.3, 0.1):
            worst = max(worst, abs(psi(0.0, lam, r) - lam / 4.0))
    out.append(Check("potential at q 0 equals lambda/4", worst < 1e-12,
                     f"worst {_num(worst)}"))
    worst = 0.0
    for lam, r in ((1.5, 0.5), (0.8, 0.3)):
        sol = minimize_psi(lam, r, tol=1e-10)
        q_se, _, converged = state_evolution(lam, r, q0=lam)
        if not converged:
            worst = np.inf
        worst = max(worst, abs(q_se - sol.q_star))
    out.append(Check("state evolution matches minimizer", worst < 1e-6,
                     f"worst {_num(worst)}"))
    sol = minimize_psi(1.5, 0.5)
    ok = sol.q_star > 0.5 and sol.psi_star < 1.5 / 4.0 - 1e-4
    out.append(Check("informative phase at lambda 1.5", ok,
                     f"q_star {_num(sol.q_star)} psi_star {_num(sol.psi_star)}"))
    return out


def _check_exact(seed) -> List[Check]:
    out = []
    params = params_from_channel(4, 0.4, 0.5, 1.2)
    mom = ensemble_moments(params, 0.4, 0.3, gh_order=24)
    gap = max(mom.nishimori_gap_site, mom.nishimori_gap_pair)
    out.append(Check("Nishimori site and pair identities", gap < 1e-9,
                     f"max gap {_num(gap)}"))
    flat = params_from_channel(4, 0.5, 0.5, 0.0)
    mi0 = exact_mi_tiny(flat)
    out.append(Check("zero signal gives zero information", mi0 == 0.0,
                     f"mi {_num(mi0)}"))
    inst = sample_instance(flat, 0.0, 0.0, child_seed(seed, 101))
    rep = gibbs_report(inst, flat, 0.0, 0.0)
    out.append(Check("flat model log Z is zero", abs(rep.log_Z) < 1e-12,
                     f"log_Z {_num(rep.log_Z)}"))
    mi_e = exact_mi_tiny(params)
    est, se = mi_via_free_energy(params, 4000, child_seed(seed, 102))
    dev = abs(est - mi_e) / se
    out.append(Check("sampled information matches enumeration", dev < 4.0,
                     f"deviation {_num(dev)} sigma"))
    return out


def _exact_state_probs(inst, params, t, R):
    n = inst.n
    ab = params.alphabet
    logw = np.empty(2 ** n)
    lp = math.log(params.r)
    lq = math.log(1.0 - params.r)
    for idx in range(2 ** n):
        bits = [(idx >> (n - 1 - i)) & 1 for i in range(n)]
        x = np.array([ab.x1 if b else ab.x2 for b in bits])
        prior = sum(lp if b else lq for b in bits)
        logw[idx] = prior - hamiltonian(x, inst, params, t, R)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def _check_mcmc(seed) -> List[Check]:
    out = []
    params = params_from_channel(3, 0.4, 0.5, 1.0)
    inst = sample_instance(params, 0.3, 0.2, child_seed(seed, 201))
    cfg = McmcConfig(sweeps=40000, burn_in=2000, chains=2,
                     seed=child_seed(seed, 202))
    rep = mcmc_brackets(inst, params, 0.3, 0.2, cfg, track_states=True)
    counts = rep.state_counts.astype(float)
    emp = counts / counts.sum()
    exact_p = _exact_state_probs(inst, params, 0.3, 0.2)
    tv = 0.5 * np.abs(emp - exact_p).sum()
    out.append(Check("heat bath matches exact posterior", tv < 0.02,
                     f"total variation {_num(tv)}"))
    params8 = params_from_channel(8, 0.5, 0.5, 1.2)
    inst8 = sample_instance(params8, 0.3, 0.2, child_seed(seed, 203))
    exact8 = gibbs_report(inst8, params8, 0.3, 0.2)
    cfg8 = McmcConfig(sweeps=3000, burn_in=600, chains=2,
                      seed=child_seed(seed, 204))
    samp8 = mcmc_brackets(inst8, params8, 0.3, 0.2, cfg8)
    dev = abs(samp8.Q2_mean - exact8.Q2_mean) / (samp8.q2_stderr + 1e-4)
    out.append(Check("sampled brackets match enumeration", dev < 4.0,
                     f"deviation {_num(dev)} sigma"))
    return out


def _check_ti(seed) -> List[Check]:
    params = params_from_channel(8, 0.5, 0.5, 1.0)
    cfg = McmcConfig(sweeps=800, burn_in=200, chains=2,
                     seed=child_seed(seed, 301))
    est = ti_mutual_information(params, ti_t_grid(9), cfg,
                                instances_per_node=6)
    oracle, o_se = mi_via_free_energy(params, 6000, child_seed(seed, 302))
    mi, se = est.mi_per_node
    dev = abs(mi - oracle) / math.sqrt(se * se + o_se * o_se)
    return [Check("thermodynamic integration matches oracle", dev < 4.0,
                  f"deviation {_num(dev)} sigma")]


def _check_interpolation(seed) -> List[Check]:
    out = []
    params = params_from_channel(6, 0.5, 0.5, 1.0)
    cfg = EstimatorConfig(instances=40, seed=child_seed(seed, 401))
    p1 = solve_R_star(params, 0.05, 15, config=cfg)
    p2 = solve_R_star(params, 0.05, 15, config=cfg)
    out.append(Check("drift solve is reproducible",
                     bool(np.array_equal(p1.R_values, p2.R_values)),
                     "identical paths"))
    mono = bool(np.all(np.diff(p1.R_values) >= 0.0))
    cap = p1.R_values[-1] <= 0.05 + params.lambda_n + 1e-12
    out.append(Check("drift path monotone and bounded", mono and cap,
                     f"R(1) {_num(p1.R_values[-1])}"))
    ratios = liouville_monotonicity(params, 0.1, d_eps=0.01, K=15,
                                    config=cfg)
    out.append(Check("initial condition response stays positive",
                     float(ratios.min()) > 0.97,
                     f"min {_num(ratios.min())}"))
    rep = sum_rule_audit(params, 0.05, K=20,
                         config=EstimatorConfig(instances=20,
                                                seed=child_seed(seed, 402)),
                         mi_samples=2000)
    ok = (rep.r1 >= -1e-15 and min(rep.r2_at_nodes) >= -1e-12
          and abs(rep.residual) < 0.1)
    out.append(Check("decomposition audit remainders", ok,
                     f"r1 {_num(rep.r1)} residual {_num(rep.residual)}"))
    return out


def _check_ibp(seed) -> List[Check]:
    out = []
    worst_margin = -np.inf
    all_pass = True
    for g_id in G_FUNCTIONS:
        for law in U_LAWS:
            chk = approx_ibp_check(g_id, law, p=0.3, mu=0.05, sigma=0.15)
            all_pass = all_pass and chk.passed
            if g_id != "linear":
                worst_margin = max(worst_margin, chk.residual - chk.bound)
    out.append(Check("moment bound covers every test function", all_pass,
                     f"worst margin {_num(worst_margin)}"))
    lin = [approx_ibp_check("linear", law, p=0.3, mu=0.05, sigma=0.15)
           for law in U_LAWS]
    ok = all(c.residual == 0.0 for c in lin)
    out.append(Check("affine case is exact", ok,
                     f"residuals {[c.residual for c in lin]}"))
    params = params_from_channel(6, 0.4, 0.3, 1.2)
    inst = sample_instance(params, 0.3, 0.25, child_seed(seed, 501))
    actual = float(inst.edges[triu_index(2, 5, 6)])
    lz = edge_relaxed_log_z(inst, params, 0.3, 2, 5, actual, 16)
    rep = gibbs_report(inst, params, 0.3, 0.25)
    err = abs(lz - rep.log_Z)
    out.append(Check("edge-relaxed partition function consistent",
                     err < 1e-9, f"err {_num(err)}"))
    chk = gibbs_edge_ibp_residual(inst, params, 0.3, 2, 5)
    out.append(Check("edge integration by parts small",
                     abs(chk.err) < 0.05, f"err {_num(chk.err)}"))
    return out


def _check_channel(seed) -> List[Check]:
    out = []
    params = params_from_channel(3, 0.4, 0.5, 1.1)
    lhs, rhs = channel_gap_identity(params, 0.4)
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-12)
    out.append(Check("channel strength gap identity", rel < 1e-6,
                     f"rel err {_num(rel)}"))
    g1, g2 = bracket_derivative_gap(params, 0.5, 0.3)
    worst = max(abs(g1), abs(g2))
    out.append(Check("bracket derivatives vanish on average",
                     worst < 1e-9, f"worst {_num(worst)}"))
    return out


def _check_serialize(seed) -> List[Check]:
    import json
    obj = {"a": 1 / 3, "b": [1, 2.5e-17, True, None], "c": {"x": "s"}}
    s1 = canonical_json(obj)
    s2 = canonical_json(json.loads(s1))
    ok = s1 == s2 and json.loads(s1)["a"] == 1 / 3
    return [Check("canonical JSON round-trips", ok, "stable bytes")]


_SECTIONS = [
    ("model", _check_model),
    ("replica", _check_replica),
    ("exact", _check_exact),
    ("mcmc", _check_mcmc),
    ("ti", _check_ti),
    ("interpolation", _check_interpolation),
    ("ibp", _check_ibp),
    ("channel", _check_channel),
    ("serialize", _check_serialize),
]


def run_suite(seed=0):
    """Run every check; returns (report text, all passed)."""
    checks = []
    for section, fn in _SECTIONS:
        for chk in fn(seed):
            checks.append((section, chk))
    width = max(len(c.name) for _, c in checks)
    lines = ["self-check suite", ""]
    for section, c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  [{section:>13s}] {c.name:<{width}s}  {c.detail}")
    n_pass = sum(c.passed for _, c in checks)
    lines.append("")
    lines.append(f"{n_pass} of {len(checks)} checks passed")
    all_pass = n_pass == len(checks)
    lines.append("OVERALL " + ("PASS" if all_pass else "FAIL"))
    return "\n".join(lines) + "\n", all_pass
