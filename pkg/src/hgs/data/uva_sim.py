"""Small UVA-Padova (2013) simulator for generating glucose cohorts.

One fixed, average adult parameter set; patients differ only through their
event streams (basal rate, meals, boluses, exercise vitals). Each simulated
instance is written as raw events and passed through the ingestion pipeline,
so the cohort exercises the same code path as recorded data.
"""
from __future__ import annotations

import numpy as np

from .dataset import Dataset
from .events import BOLUS_RATE, CARB_GRAMS_PER_MIN, CARB_RATE, GRID_STEP, N_STAMPS, EventStream, discretize

STATE_NAMES = ("Gp", "Gt", "Ip", "Il", "Qsto1", "Qsto2", "Qgut", "XL", "Ir", "XH",
               "X", "E", "Isc1", "Isc2", "Gs", "H", "SRsH", "SRdH", "Hsc1", "Hsc2")
IX = {n: i for i, n in enumerate(STATE_NAMES)}

PARAMS = dict(
    BW=78.0, VG=1.88, k1=0.065, k2=0.079, VI=0.05, m1=0.190, m2=0.484, m4=0.194, HEb=0.6,
    kmax=0.0558, kmin=0.0080, kabs=0.057, kgri=0.0558, f=0.90, b=0.82, c=0.010,
    kp2=0.0021, kp3=0.009, ki=0.0079, xi=0.0065, kH=0.093,
    Fcns=1.0, Vm0=2.50, Vmx=0.047, Km0=225.59, p2U=0.0331, r1=1.44, r2=0.8124, Gth=60.0,
    ke1=0.0005, ke2=339.0, kd=0.0164, ka1=0.0018, ka2=0.0182, Ts=0.1,
    n=0.22, rho=0.57, sigma=1.72, sigma2=1.72, eta=0.05, Hb=93.0,
    kh1=0.0164, kh2=0.0018, kh3=0.0182, Gb=120.0,
)
PMOL_PER_U = 6000.0


def steady_state(basal_u_per_h: float, p: dict = PARAMS) -> tuple[np.ndarray, dict]:
    """Fasting steady state under a constant basal rate; returns (state, derived constants)."""
    p = dict(p)
    m3 = p["HEb"] * p["m1"] / (1 - p["HEb"])
    iir = basal_u_per_h / 60.0 * PMOL_PER_U / p["BW"]
    isc1 = iir / (p["kd"] + p["ka1"])
    isc2 = p["kd"] * isc1 / p["ka2"]
    rai = p["ka1"] * isc1 + p["ka2"] * isc2
    ip = rai / (p["m2"] + p["m4"] - p["m1"] * p["m2"] / (p["m1"] + m3))
    il = p["m2"] * ip / (p["m1"] + m3)
    ib = ip / p["VI"]
    gp = p["Gb"] * p["VG"]
    # k1 Gp = k2 Gt + Vm0 Gt / (Km0 + Gt): positive root of the quadratic in Gt
    a, bq, cq = p["k2"], p["k2"] * p["Km0"] + p["Vm0"] - p["k1"] * gp, -p["k1"] * gp * p["Km0"]
    gt = (-bq + np.sqrt(bq * bq - 4 * a * cq)) / (2 * a)
    egp = p["Fcns"] + p["k1"] * gp - p["k2"] * gt
    kp1 = egp + p["kp2"] * gp + p["kp3"] * ib
    srhb = p["n"] * p["Hb"]
    # secretion settles on the same clipped target the dynamics use; above threshold that can be 0
    srs = _secretion_target(p["Gb"], ib, p, srhb)
    s = np.zeros(len(STATE_NAMES))
    s[[IX["Gp"], IX["Gt"], IX["Ip"], IX["Il"], IX["XL"], IX["Ir"], IX["Isc1"], IX["Isc2"], IX["Gs"], IX["H"],
       IX["SRsH"]]] = [gp, gt, ip, il, ib, ib, isc1, isc2, p["Gb"], srs / p["n"], srs]
    return s, {"m3": m3, "Ib": ib, "kp1": kp1, "SRHb": srhb}


def _secretion_target(G: float, I: float, p: dict, srhb: float) -> float:
    if G >= p["Gb"]:
        return max(p["sigma2"] * (p["Gth"] - G) + srhb, 0.0)
    return max(p["sigma"] * (p["Gth"] - G) / (I + 1) + srhb, 0.0)


def rhs(s: np.ndarray, iir: float, carb_mg: float, meal_mg: float, p: dict, d: dict,
        glucagon: float = 0.0) -> np.ndarray:
    """Time derivative of the 20 states (per minute).

    ``iir`` in pmol/kg/min, ``carb_mg`` ingestion rate in mg/min, ``meal_mg``
    the size of the latest meal (shapes gastric emptying).
    """
    Gp, Gt, Ip, Il, Q1, Q2, Qg, XL, Ir, XH, X, E, I1, I2, Gs, H, SRs, SRd, H1, H2 = s
    G = Gp / p["VG"]
    I = Ip / p["VI"]
    qsto = Q1 + Q2
    if meal_mg > 0:
        alpha = 5.0 / (2.0 * meal_mg * (1 - p["b"]))
        beta = 5.0 / (2.0 * meal_mg * p["c"])
        kempt = p["kmin"] + (p["kmax"] - p["kmin"]) / 2 * (
            np.tanh(alpha * (qsto - p["b"] * meal_mg)) - np.tanh(beta * (qsto - p["c"] * meal_mg)) + 2)
    else:
        kempt = p["kmax"]
    Ra = p["f"] * p["kabs"] * Qg / p["BW"]
    EGP = d["kp1"] - p["kp2"] * Gp - p["kp3"] * XL + p["xi"] * XH
    Gb, Gth = p["Gb"], p["Gth"]
    if G >= Gb:
        risk = 0.0
    else:
        risk = 10.0 * abs(np.log(max(G, Gth)) - np.log(Gb)) ** (2 * p["r2"])
    Uid = (p["Vm0"] + p["Vmx"] * X * (1 + p["r1"] * risk)) * Gt / (p["Km0"] + Gt)
    Rai = p["ka1"] * I1 + p["ka2"] * I2
    dGp = EGP + Ra - p["Fcns"] - E - p["k1"] * Gp + p["k2"] * Gt
    target = _secretion_target(G, I, p, d["SRHb"])
    out = np.empty(20)
    out[0] = dGp
    out[1] = -Uid + p["k1"] * Gp - p["k2"] * Gt
    out[2] = -(p["m2"] + p["m4"]) * Ip + p["m1"] * Il + Rai
    out[3] = -(p["m1"] + d["m3"]) * Il + p["m2"] * Ip
    out[4] = -p["kgri"] * Q1 + carb_mg
    out[5] = -kempt * Q2 + p["kgri"] * Q1
    out[6] = -p["kabs"] * Qg + kempt * Q2
    out[7] = -p["ki"] * (XL - Ir)
    out[8] = -p["ki"] * (Ir - I)
    out[9] = -p["kH"] * XH + p["kH"] * max(H - p["Hb"], 0.0)
    out[10] = -p["p2U"] * X + p["p2U"] * (I - d["Ib"])
    out[11] = p["ke1"] * max(Gp - p["ke2"], 0.0)
    out[12] = -(p["kd"] + p["ka1"]) * I1 + iir
    out[13] = p["kd"] * I1 - p["ka2"] * I2
    out[14] = -p["Ts"] * Gs + p["Ts"] * G
    out[15] = -p["n"] * H + SRs + SRd + p["kh3"] * H2
    out[16] = -p["rho"] * (SRs - target)
    out[17] = p["eta"] * max(-dGp / p["VG"], 0.0)
    out[18] = -(p["kh1"] + p["kh2"]) * H1 + glucagon
    out[19] = p["kh1"] * H1 - p["kh3"] * H2
    return out


def simulate(stream: EventStream, t_start: float, t_end: float, h: float = 0.25, p: dict = PARAMS) -> tuple:
    """Classic RK4 from the basal steady state at ``t_start``; returns (times, states).

    Inputs are held at their value at the start of each step; ``h`` divides
    the bolus and meal boundaries used by ``make_stream`` exactly.
    """
    basal0 = stream.basal[0][1] if stream.basal else 0.0
    s, d = steady_state(basal0, p)
    n = int(round((t_end - t_start) / h))
    times = t_start + h * np.arange(n + 1)
    out = np.empty((n + 1, len(s)))
    out[0] = s
    doses = [(tb, tb + b / BOLUS_RATE) for tb, b in _merged(stream.bolus)]
    meals = [(tm, tm + m / CARB_GRAMS_PER_MIN, m * 1000.0) for tm, m in stream.carbs]
    for k in range(n):
        t = times[k]
        basal = 0.0
        for ta, a in stream.basal:
            if ta <= t:
                basal = a
        bolus = sum(BOLUS_RATE for a, b in doses if a <= t < b)
        iir = (basal / 60.0 + bolus) * PMOL_PER_U / p["BW"]
        carb = CARB_RATE * sum(1 for a, b, _ in meals if a <= t < b)
        started = [mg for a, _, mg in meals if a <= t]
        meal_mg = started[-1] if started else 0.0
        f = lambda x: rhs(x, iir, carb, meal_mg, p, d)  # noqa: E731
        k1 = f(s)
        k2 = f(s + h / 2 * k1)
        k3 = f(s + h / 2 * k2)
        k4 = f(s + h * k3)
        s = s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = s
    return times, out


def _merged(bolus):
    from .events import merge_bolus
    return merge_bolus(bolus)


def make_stream(rng: np.random.Generator, onset: float = 210.0) -> EventStream:
    """Random events for one 265-minute window with exercise starting at ``onset``.

    Times are whole minutes or quarter minutes so the simulator's input
    switching lines up with the exact rate boundaries.
    """
    basal = float(np.round(rng.uniform(0.6, 1.4), 2))
    ev_basal = [(-120.0, basal)]
    if rng.random() < 0.5:
        ev_basal.append((float(rng.integers(60, 200)), float(np.round(basal * rng.uniform(0.5, 0.9), 2))))
    meals, boluses = [], []
    t_meal = float(rng.integers(0, 120))
    grams = float(rng.choice([30, 45, 60, 75, 90]))
    meals.append((t_meal, grams))
    boluses.append((t_meal, float(np.round(grams / rng.uniform(8, 15) * 4) / 4)))
    if rng.random() < 0.4:
        t2 = float(t_meal + rng.integers(1, 4))
        boluses.append((t2, 0.75))
    if rng.random() < 0.3:
        meals.append((float(rng.integers(150, 240)), float(rng.choice([15, 30]))))
    hr, steps = [], []
    for t in np.arange(0.0, 270.0, 1.0):
        active = t >= onset
        hr.append((float(t), float(70 + 45 * active + rng.normal(0, 4))))
        steps.append((float(t), float(max(0.0, (110 if active else 2) + rng.normal(0, 10)))))
    return EventStream(basal=ev_basal, bolus=boluses, carbs=meals, heart_rate=hr, steps=steps)


def uva_cohort(seed: int = 0, size: int = 50, cgm_noise: float = 2.0, with_glucagon: bool = True) -> Dataset:
    """Simulated exercise instances windowed like recorded data: 42 history stamps, 12 forecast stamps."""
    rng = np.random.default_rng(seed)
    series = []
    t_stamps = GRID_STEP * np.arange(N_STAMPS)
    for _ in range(size):
        stream = make_stream(rng)
        times, states = simulate(stream, -120.0, float(t_stamps[-1]))
        idx = np.searchsorted(times, t_stamps)
        gs = states[idx, IX["Gs"]] + rng.normal(0, cgm_noise, N_STAMPS)
        stream.cgm = [(float(t), float(g)) for t, g in zip(t_stamps, gs)]
        series.append(discretize(stream).series)
    from .events import series_to_dataset
    ds = series_to_dataset(np.array(series), {"generator": "uva", "seed": seed, "size": size})
    if with_glucagon:
        zeros = np.zeros(ds.past_inputs.shape[:2] + (1,))
        ds = Dataset(ds.past_obs, np.concatenate([ds.past_inputs, zeros], axis=2),
                     np.concatenate([ds.future_inputs, np.zeros(ds.future_inputs.shape[:2] + (1,))], axis=2),
                     ds.future_obs, ds.obs_names, ds.input_names + ["glucagon"], ds.meta)
    return ds
