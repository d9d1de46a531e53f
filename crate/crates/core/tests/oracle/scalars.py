"""Arbitrary-precision reference values for the analytic test suites.

Run with `python3 scalars.py`; the printed values are frozen into the Rust
tests. Nothing here shares code with the crate.
"""
from mpmath import mp, mpf, exp, log, ln

mp.dps = 40

TAU = mpf("0.1")          # tau / T
GAMMA_S = mpf("1e-9") / mpf("1e-11")
GAMMA_P = mpf("1e-10") / mpf("1e-11")


def succ(rate_over_band, gs):
    return exp(-(mpf(2) ** rate_over_band - 1) / gs)


def chain(R, lp, delta=None, omega=None, ls=None, cap=None):
    out = {}
    p_pd = 1 - succ(R, GAMMA_P)
    p_ps = p_pd
    mu_p = 1 - p_pd * p_ps
    pi0 = 1 - lp / mu_p
    lam_ps = p_pd * (1 - p_ps) * (1 - pi0)
    rs = R / (1 - TAU)
    full = succ(rs, GAMMA_S)
    out.update(p_pd=p_pd, mu_p=mu_p, pi0=pi0, lam_ps=lam_ps, full=full)
    out["pcr_mu_s"] = (1 - lam_ps / (pi0 * full)) * pi0 * full
    out["pcr_omega"] = 1 - lam_ps / (pi0 * full)
    E = full
    Y = p_pd * (1 - p_ps)
    out["lp_max"] = mu_p * E / (E + Y)
    if lp > 0:
        out["kappa"] = R / ((1 - TAU) * log(1 + GAMMA_S * ln((mu_p - lp) / (Y * lp)), 2))
    if delta is not None:
        e = lambda d: succ(rs / d, GAMMA_S) if d > 0 else mpf(0)
        phi_sd = omega * e(delta) + (1 - omega) * e(1 - delta)
        phi_pd = omega * e(1 - delta) + (1 - omega) * e(delta)
        out.update(phi_sd=phi_sd, phi_pd=phi_pd, mu_s=pi0 * phi_sd, mu_ps=pi0 * phi_pd)
        out["zeta1"] = lam_ps / pi0 - e(delta)
        out["zeta2"] = lam_ps / pi0 - e(1 - delta)
        out["beta"] = out["zeta1"] - out["zeta2"]
        if ls is not None:
            num = (-mu_p + phi_sd - mu_p * phi_sd) * lp - mu_p**2 * ls + mu_p * lp * ls + mu_p**2
            den = (phi_sd * lp + mu_p * ls - mu_p * phi_sd) * (lp - mu_p)
            out["D_s"] = num / den
        pbar = 1 - p_pd
        a = Y + phi_pd
        f = Y * ((phi_pd - pbar) / mu_p - a)
        g = Y * mu_p
        B = mu_p * (-a - phi_pd)
        c = phi_pd * mu_p**2
        out.update(Y=Y, f=f, g=g, a=a, B=B, c=c)
        out["D_p"] = (1 - lp) / (mu_p - lp) + (f * lp + g) / (a * lp**2 + B * lp + c)
        if cap is not None:
            out["DD"] = cap - (1 - lp) / (mu_p - lp)
    return out


def rmax(lp):
    def g(R):
        p = 1 - succ(R, GAMMA_P)
        mu = 1 - p * p
        if p * (1 - p) == 0 or mu <= lp:
            return mpf(-1)
        arg = (mu - lp) / (p * (1 - p) * lp)
        if arg <= 1:
            return mpf(-1)
        return (1 - TAU) * log(1 + GAMMA_S * ln(arg), 2) - R
    lo, hi = mpf("0.01"), mpf(20)
    for _ in range(200):
        mid = (lo + hi) / 2
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


if __name__ == "__main__":
    print("succ(1/0.9, 100) =", succ(mpf(1) / mpf("0.9"), GAMMA_S))
    print("outage(1, 10)    =", 1 - succ(mpf(1), GAMMA_P))
    base = chain(mpf(1), mpf("0.5"), mpf("0.6"), mpf("0.7"), mpf("0.2"), mpf(2))
    for k, v in base.items():
        print(f"{k:10s} {mp.nstr(v, 15)}")
    print("delta* =", mp.nstr(1 - base["kappa"], 15))
    print("R_max(0.5) =", mp.nstr(rmax(mpf("0.5")), 15))
    print("R_max(0.8) =", mp.nstr(rmax(mpf("0.8")), 15))
    z = chain(mpf(1), mpf(0))
    print("lambda_p=0 full =", mp.nstr(z["full"], 15))
