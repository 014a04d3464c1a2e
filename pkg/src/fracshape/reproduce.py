"""The worked non-minimum-phase example end to end: gains, Bode data,
margins, step/disturbance responses and the checks that go with them."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .approx import BandSpec
from .focore import eval_freq, log_grid
from .loopshape import DEFAULT_BAND, EXAMPLE_OMEGA_C, POINTS_PER_DECADE, controller_gain, example_loops, margins
from .simtime import response_metrics, step_response

REFERENCE_GAINS = {"C1": 0.68, "C2": 0.772, "C3": 1.091, "C4": 0.7245}
GAIN_RTOL = 5e-3
L1_GAIN_MARGIN_DB = (1.26, 0.05)
L1_OMEGA_PI = (2.88, 0.05)
OMEGA_C_TOL = 5e-3
MIN_PHASE_MARGIN = 55.0
MIN_GAIN_MARGIN_DB = 3.0
FINAL_TOL = 2e-3
GL_MAX_DEVIATION = 0.02
GL_WINDOW = 30.0
SIM_T_END = 60.0
SIM_DT = 1e-3
FIGURES = ("bode", "margins", "step", "all")

AXES = {
    "bode": {"x": "omega [rad/s]", "y": ["|L(j omega)| [dB]", "arg L(j omega) [deg]"], "scale": "log-x"},
    "step": {"x": "t [s]", "y": "y(t), unit reference step"},
    "disturbance": {"x": "t [s]", "y": "y(t), unit step disturbance at plant input"},
}


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def bode_csv(resp) -> str:
    rows = ["omega,mag_db,phase_deg"]
    rows += ["%.9g,%.9g,%.9g" % r for r in zip(resp.omega, resp.magnitude_db, resp.phase_deg)]
    return "\n".join(rows) + "\n"


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class Reproduction:
    files: dict = field(default_factory=dict)      # relative name -> text
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(passed), detail))

    @property
    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def write(self, out_dir: str) -> list:
        paths = []
        for name in sorted(self.files):
            path = os.path.join(out_dir, name)
            write_atomic(path, self.files[name])
            paths.append(path)
        return paths


def gains_and_margins(rep: Reproduction, loops: dict) -> None:
    gains = {name: controller_gain(loop.controller) for name, loop in loops.items()}
    reports = {name: margins(loop) for name, loop in loops.items()}
    for name, k in gains.items():
        ref = REFERENCE_GAINS[name]
        rep.check("gain_%s" % name, abs(k - ref) <= GAIN_RTOL * ref, "k=%.5f, reference %.4g" % (k, ref))
    for name, m in reports.items():
        rep.check("omega_c_%s" % name, abs(m.omega_c - EXAMPLE_OMEGA_C) <= OMEGA_C_TOL, "omega_c=%.6f" % m.omega_c)
        rep.check("phase_margin_%s" % name, m.phase_margin_deg > MIN_PHASE_MARGIN,
                  "PM=%.3f deg" % m.phase_margin_deg)
        if name != "C1":
            rep.check("gain_margin_%s" % name, m.gain_margin_db > MIN_GAIN_MARGIN_DB,
                      "GM=%.3f dB" % m.gain_margin_db)
    m1 = reports["C1"]
    gm, tol = L1_GAIN_MARGIN_DB
    rep.check("gain_margin_C1", abs(m1.gain_margin_db - gm) <= tol, "GM=%.4f dB" % m1.gain_margin_db)
    wp, tol = L1_OMEGA_PI
    rep.check("omega_pi_C1", m1.omega_pi is not None and abs(m1.omega_pi - wp) <= tol,
              "omega_pi=%s" % m1.omega_pi)
    rep.data["gains"] = gains
    rep.data["margins"] = reports
    rep.files["margins.json"] = dump_json({
        "convention": "L = -G*C (negated loop)",
        "controllers": {name: {"gain": gains[name], **reports[name].to_dict()} for name in loops},
    })


def bode_files(rep: Reproduction, loops: dict) -> None:
    grid = log_grid(DEFAULT_BAND[0], DEFAULT_BAND[1], POINTS_PER_DECADE)
    for i, (name, loop) in enumerate(loops.items(), start=1):
        rep.files["bode_L%d.csv" % i] = bode_csv(eval_freq(loop.open_loop(), grid))


def step_files(rep: Reproduction, loops: dict, t_end: float = SIM_T_END, dt: float = SIM_DT) -> None:
    band = BandSpec(DEFAULT_BAND[0], DEFAULT_BAND[1], 5)
    metrics, steps = {}, {}
    for name, loop in loops.items():
        ts = step_response(loop, "reference", "oustaloup", t_end, dt, band)
        dist = step_response(loop, "disturbance", "oustaloup", t_end, dt, band)
        rep.files["step_%s.csv" % name] = ts.to_csv()
        rep.files["disturbance_%s.csv" % name] = dist.to_csv()
        m = response_metrics(ts, 1.0, tol=FINAL_TOL)
        metrics[name] = {"step": m.to_dict(), "disturbance": response_metrics(dist, 0.0).to_dict(),
                         "warnings": list(ts.warnings)}
        steps[name] = ts
        rep.check("converged_%s" % name, m.converged, "y(%g)=%.6f" % (t_end, ts.y[-1]))
    gl = step_response(loops["C3"], "reference", "gl", t_end, dt)
    rep.files["step_C3_gl.csv"] = gl.to_csv()
    dev = float(np.max(np.abs(gl.window(GL_WINDOW).y - steps["C3"].window(GL_WINDOW).y)))
    rep.check("gl_vs_oustaloup_C3", dev <= GL_MAX_DEVIATION, "sup deviation on [0,%g] s = %.5f" % (GL_WINDOW, dev))

    u = {name: metrics[name]["step"]["undershoot"] for name in loops}
    o = {name: metrics[name]["step"]["overshoot"] for name in loops}
    rep.check("undershoot_C1_gt_C3", u["C1"] > u["C3"], "%.4f > %.4f" % (u["C1"], u["C3"]))
    rep.check("undershoot_C1_gt_C4", u["C1"] > u["C4"], "%.4f > %.4f" % (u["C1"], u["C4"]))
    rep.check("overshoot_C2_gt_C3", o["C2"] > o["C3"], "%.4f > %.4f" % (o["C2"], o["C3"]))
    rep.data.update(steps=steps, gl=gl, metrics=metrics, gl_deviation=dev)
    rep.files["metrics.json"] = dump_json({
        "dt": dt,
        "t_end": t_end,
        "band": list(DEFAULT_BAND),
        "N": 5,
        "controllers": metrics,
        "gl_vs_oustaloup_C3": {"window_s": GL_WINDOW, "sup_deviation": dev},
    })


def reproduce(figure: str = "all", t_end: float = SIM_T_END, dt: float = SIM_DT) -> Reproduction:
    if figure not in FIGURES:
        raise ValueError("figure must be one of %s" % (FIGURES,))
    loops = example_loops()
    rep = Reproduction()
    if figure in ("margins", "all"):
        gains_and_margins(rep, loops)
    if figure in ("bode", "all"):
        bode_files(rep, loops)
    if figure in ("step", "all"):
        step_files(rep, loops, t_end, dt)
    rep.files["figures.json"] = dump_json({k: v for k, v in AXES.items()
                                           if figure == "all" or k.startswith(figure) or
                                           (figure == "step" and k == "disturbance")})
    rep.files["checks.json"] = dump_json([c.to_dict() for c in rep.checks])
    return rep
