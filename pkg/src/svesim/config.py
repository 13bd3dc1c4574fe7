"""Experiment configuration files: TOML schema, diagnostics and construction.

A configuration is a TOML document::

    command = "compare"          # simulate | compare | convergence | ml | check | counterexample

    [sim]                        # required by simulate, compare, convergence, counterexample
    T = 1.0
    N = 200
    M = 8
    n_paths = 10000
    seed = 20240521              # mandatory, there is no entropy default
    scheme = "splitting"         # or "euler"

    [kernel]                     # tagged record: fractional | expsum | shifted | tabulated
    type = "fractional"
    alpha = 0.7

    [kernel.soe]                 # optional sum-of-exponentials replacement of a fractional kernel
    n_nodes = 60
    rho_min = 1e-3
    rho_max = 1e4

    [[problem]]                  # one per equation (two for compare)
    curve = { type = "constant", x = 0.0 }
    drift = { family = "linear", a = 0.0, beta = 1.0 }
    diffusion = { family = "constant", c = 1.0 }

    [output]
    dir = "out"
    formats = ["csv", "svg"]

Command tables ``[compare]``, ``[convergence]``, ``[ml]``, ``[check]`` and
``[counterexample]`` hold the per-command options listed in ``COMMAND_KEYS``.
"""
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import SveError
from .kernels import FractionalKernel, TabulatedKernel, kernel_from_record, soe_from_fractional
from .model import InputCurve, SveProblem, coefficient_from_record
from .schemes import SimConfig

COMMANDS = ("simulate", "compare", "convergence", "ml", "check", "counterexample")
SCHEMES = ("splitting", "euler")
FORMATS = ("csv", "svg")
NEEDS_SIM = {"simulate", "compare", "convergence", "counterexample"}
# number of [[problem]] entries: (min, max)
N_PROBLEMS = {"simulate": (1, 1), "compare": (2, 2), "convergence": (1, 1), "check": (1, 2),
              "ml": (0, 0), "counterexample": (0, 0)}
SIM_KEYS = {"T": True, "N": True, "M": False, "n_paths": True, "seed": True, "scheme": False,
            "chunk_size": False, "threads": False}
# key -> required
COMMAND_KEYS = {
    "compare": {"delta": False},
    "convergence": {"Ns": True, "ref_factor": False, "t_eval": False},
    "ml": {"alpha": True, "gamma": True, "beta": False, "t_max": False, "n_grid": False},
    "check": {"q": True, "eta": True},
    "counterexample": {"alpha": True, "beta0": True, "x1": True, "x2": True, "sigma": False},
    "simulate": {},
}
TOP_KEYS = {"command", "sim", "kernel", "problem", "output"} | set(COMMAND_KEYS)
SOE_KEYS = ("n_nodes", "rho_min", "rho_max")


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str
    line: int = None

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.field}: {self.message}"


@dataclass
class Experiment:
    """A validated configuration turned into library objects."""

    command: str
    sim: SimConfig = None
    scheme: str = "splitting"
    kernel: object = None
    problems: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    formats: tuple = FORMATS
    raw: dict = field(default_factory=dict)


class ConfigError(SveError):
    """Raised by :func:`load` when a configuration has diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


def _locate(text, path):
    """Best-effort source line of a dotted field such as ``problem[1].drift`` or ``sim.N``."""
    m = re.fullmatch(r"(\w+)(?:\[(\d+)\])?(?:\.(\w+))?(?:\.(\w+))?", path)
    if not m or text is None:
        return None
    table, idx, key, sub = m.group(1), int(m.group(2) or 0), m.group(3), m.group(4)
    if sub and key == "soe":
        table, key = "kernel.soe", sub
    current, seen = "", {}
    header_line = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        hm = re.match(r"^\[\[?\s*([\w.]+)\s*\]\]?", s)
        if hm:
            current = hm.group(1)
            seen[current] = seen.get(current, -1) + 1
            if current == table and seen[current] == idx:
                header_line = no
                if key is None:
                    return no
            continue
        if key is None:
            if current == "" and re.match(rf"^{table}\s*=", s):
                return no
            continue
        if current == table and seen.get(current, 0) == idx and re.match(rf"^{key}\s*=", s):
            return no
        if current == "" and table == key and re.match(rf"^{key}\s*=", s):
            return no
    return header_line


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _build_kernel(rec, diags, text):
    if not isinstance(rec, dict):
        diags.append(Diagnostic("kernel", "missing required table", _locate(text, "kernel")))
        return None
    if "type" not in rec:
        diags.append(Diagnostic("kernel.type", "missing required field", _locate(text, "kernel")))
        return None
    base = {k: v for k, v in rec.items() if k != "soe"}
    try:
        k = kernel_from_record(base)
    except (SveError, ValueError, KeyError, TypeError) as exc:
        diags.append(Diagnostic("kernel", f"invalid kernel record: {exc}", _locate(text, "kernel")))
        return None
    soe = rec.get("soe")
    if soe is None:
        return k
    if not isinstance(k, FractionalKernel):
        diags.append(Diagnostic("kernel.soe", "only a fractional kernel can be replaced by a "
                                "sum of exponentials", _locate(text, "kernel.soe")))
        return None
    missing = [s for s in SOE_KEYS if s not in soe]
    for s in missing:
        diags.append(Diagnostic(f"kernel.soe.{s}", "missing required field",
                                _locate(text, "kernel.soe")))
    if missing:
        return None
    try:
        return soe_from_fractional(k.alpha, int(soe["n_nodes"]), float(soe["rho_min"]),
                                   float(soe["rho_max"]))
    except (SveError, ValueError, TypeError) as exc:
        diags.append(Diagnostic("kernel.soe", str(exc), _locate(text, "kernel.soe")))
        return None


def _build_curve(rec, where, diags, text):
    if not isinstance(rec, dict) or "type" not in rec:
        diags.append(Diagnostic(f"{where}.curve", "needs a record with a type "
                                "('constant' or 'power')", _locate(text, f"{where}.curve")))
        return None
    try:
        if rec["type"] == "constant":
            return InputCurve.constant(float(rec["x"]))
        if rec["type"] == "power":
            return InputCurve.power(float(rec["x"]), float(rec["gamma0"]))
        raise ValueError(f"unknown curve type {rec['type']!r}")
    except (SveError, ValueError, KeyError, TypeError) as exc:
        diags.append(Diagnostic(f"{where}.curve", f"invalid curve record: {exc}",
                                _locate(text, f"{where}.curve")))
        return None


def _build_coefficient(rec, where, diags, text):
    if not isinstance(rec, dict) or "family" not in rec:
        diags.append(Diagnostic(where, "needs a record with a family", _locate(text, where)))
        return None
    try:
        return coefficient_from_record(rec)
    except (SveError, ValueError, KeyError, TypeError) as exc:
        diags.append(Diagnostic(where, f"invalid coefficient record: {exc}", _locate(text, where)))
        return None


def _check_keys(table, schema, prefix, diags, text):
    for key, required in schema.items():
        if required and key not in table:
            diags.append(Diagnostic(f"{prefix}.{key}", "missing required field", _locate(text, prefix)))
    for key in table:
        if key not in schema:
            diags.append(Diagnostic(f"{prefix}.{key}", "unknown field", _locate(text, f"{prefix}.{key}")))


def _numbers(table, prefix, keys, diags, text, integer=()):
    ok = True
    for key in keys:
        if key not in table:
            continue
        v = table[key]
        good = _is_int(v) if key in integer else _is_num(v)
        if not good:
            kind = "an integer" if key in integer else "a number"
            diags.append(Diagnostic(f"{prefix}.{key}", f"must be {kind}", _locate(text, f"{prefix}.{key}")))
            ok = False
    return ok


def check_config(cfg, text=None):
    """Schema and cross-field checks. Returns ``(diagnostics, experiment or None)``."""
    diags = []
    if not isinstance(cfg, dict):
        return [Diagnostic("<root>", "not a table")], None
    for key in cfg:
        if key not in TOP_KEYS:
            diags.append(Diagnostic(key, "unknown top-level field", _locate(text, key)))
    command = cfg.get("command")
    if command is None:
        diags.append(Diagnostic("command", f"missing required field (one of {', '.join(COMMANDS)})"))
    elif command not in COMMANDS:
        diags.append(Diagnostic("command", f"unknown command {command!r}", _locate(text, "command")))
        command = None
    # with no usable command, report everything a simulate run would need
    cmd = command or "simulate"
    exp = Experiment(command=cmd, raw=cfg)

    if cmd in NEEDS_SIM:
        sim = cfg.get("sim")
        if not isinstance(sim, dict):
            for key, req in SIM_KEYS.items():
                if req:
                    diags.append(Diagnostic(f"sim.{key}", "missing required field"))
        else:
            _check_keys(sim, SIM_KEYS, "sim", diags, text)
            ints = ("N", "M", "n_paths", "seed", "chunk_size", "threads")
            if _numbers(sim, "sim", [k for k in SIM_KEYS if k != "scheme"], diags, text, integer=ints) and all(
                    k in sim for k, r in SIM_KEYS.items() if r and k != "scheme"):
                n_before = len(diags)
                for key in ("T", "N", "M", "n_paths", "chunk_size", "threads"):
                    if key in sim and not sim[key] > 0:
                        diags.append(Diagnostic(f"sim.{key}", "must be positive", _locate(text, f"sim.{key}")))
                if not 0 <= sim["seed"] < 2 ** 64:
                    diags.append(Diagnostic("sim.seed", "must be a 64-bit unsigned integer",
                                            _locate(text, "sim.seed")))
                if len(diags) == n_before:
                    try:
                        exp.sim = SimConfig(float(sim["T"]), sim["N"], sim.get("M", 1), sim["n_paths"],
                                            sim["seed"], sim.get("chunk_size", 512), sim.get("threads", 1))
                    except SveError as exc:
                        diags.append(Diagnostic("sim", str(exc), _locate(text, "sim")))
            scheme = sim.get("scheme", "splitting")
            if scheme not in SCHEMES:
                diags.append(Diagnostic("sim.scheme", f"must be one of {SCHEMES}", _locate(text, "sim.scheme")))
            else:
                exp.scheme = scheme

    lo, hi = N_PROBLEMS[cmd]
    if hi > 0:
        exp.kernel = _build_kernel(cfg.get("kernel"), diags, text)
        probs = cfg.get("problem", [])
        if not isinstance(probs, list):
            probs = []
        if not lo <= len(probs) <= hi:
            want = str(lo) if lo == hi else f"{lo} to {hi}"
            diags.append(Diagnostic("problem", f"{cmd} needs {want} [[problem]] entries, got {len(probs)}",
                                    _locate(text, "problem")))
        T = exp.sim.T if exp.sim is not None else float(cfg.get("sim", {}).get("T", 1.0))
        for i, rec in enumerate(probs[:hi]):
            where = f"problem[{i}]"
            if not isinstance(rec, dict):
                diags.append(Diagnostic(where, "must be a table"))
                continue
            _check_keys(rec, {"curve": True, "drift": True, "diffusion": True}, where, diags, text)
            curve = _build_curve(rec.get("curve"), where, diags, text)
            b = _build_coefficient(rec.get("drift"), f"{where}.drift", diags, text) if "drift" in rec else None
            s = _build_coefficient(rec.get("diffusion"), f"{where}.diffusion", diags, text) \
                if "diffusion" in rec else None
            if None not in (curve, b, s, exp.kernel):
                exp.problems.append(SveProblem(curve, exp.kernel, b, s, T))
        _cross_checks(cfg, exp, diags, text)

    table = cfg.get(cmd, {})
    if not isinstance(table, dict):
        diags.append(Diagnostic(cmd, "must be a table", _locate(text, cmd)))
        table = {}
    _check_keys(table, COMMAND_KEYS[cmd], cmd, diags, text)
    _numbers(table, cmd, [k for k in COMMAND_KEYS[cmd] if k != "Ns"], diags, text,
             integer=("n_grid", "ref_factor"))
    exp.options = dict(table)
    _command_checks(cmd, table, exp, diags, text)

    out = cfg.get("output", {})
    if not isinstance(out, dict):
        diags.append(Diagnostic("output", "must be a table", _locate(text, "output")))
        out = {}
    _check_keys(out, {"dir": False, "formats": False}, "output", diags, text)
    exp.out_dir = Path(out.get("dir", "out"))
    formats = out.get("formats", list(FORMATS))
    bad = [f for f in formats if f not in FORMATS] if isinstance(formats, list) else [formats]
    if bad:
        diags.append(Diagnostic("output.formats", f"unsupported formats {bad}; allowed {FORMATS}",
                                _locate(text, "output.formats")))
    else:
        exp.formats = tuple(formats)
    return diags, (None if diags else exp)


def _cross_checks(cfg, exp, diags, text):
    krec = cfg.get("kernel") if isinstance(cfg.get("kernel"), dict) else {}
    k = exp.kernel
    if exp.command in ("simulate", "compare", "convergence") and exp.scheme == "splitting" \
            and isinstance(k, FractionalKernel) and not math.isfinite(k.k0) and "soe" not in krec:
        diags.append(Diagnostic(
            "kernel.soe", f"fractional kernel with alpha={k.alpha:g} has K(0+) = inf; the splitting "
            "scheme needs K(0+) finite, add a [kernel.soe] truncation block or use scheme = \"euler\"",
            _locate(text, "kernel")))
    if isinstance(k, TabulatedKernel) and exp.sim is not None and k.t_max < exp.sim.T:
        diags.append(Diagnostic("kernel.grid", f"tabulated kernel ends at {k.t_max:g} < T = {exp.sim.T:g}",
                                _locate(text, "kernel")))
    if exp.command == "check" and len(exp.problems) == 2 and not isinstance(k, FractionalKernel):
        for i, p in enumerate(exp.problems):
            if p.g.singular is not None and p.g.singular[0] != 0:
                diags.append(Diagnostic(f"problem[{i}].curve", "a power curve can only be compared under "
                                        "a fractional kernel", _locate(text, f"problem[{i}].curve")))


def _command_checks(cmd, t, exp, diags, text):
    def bad(key, msg):
        diags.append(Diagnostic(f"{cmd}.{key}", msg, _locate(text, f"{cmd}.{key}")))

    num = lambda key: key in t and _is_num(t[key])  # noqa: E731
    if cmd == "compare" and num("delta") and t["delta"] < 0:
        bad("delta", "must be nonnegative")
    elif cmd == "convergence" and "Ns" in t:
        Ns = t["Ns"]
        if not (isinstance(Ns, list) and Ns and all(_is_int(n) and n > 0 for n in Ns)):
            bad("Ns", "must be a nonempty list of positive integers")
            return
        if sorted(set(Ns)) != Ns:
            bad("Ns", "must be strictly increasing")
            return
        ref = int(t.get("ref_factor", 4)) * max(Ns)
        if num("ref_factor") and t["ref_factor"] < 1:
            bad("ref_factor", "must be >= 1")
        elif any(ref % n for n in Ns):
            bad("Ns", f"every N must divide the reference size {ref}")
        if num("t_eval") and exp.sim is not None:
            for n in Ns + [ref]:
                pos = t["t_eval"] / exp.sim.T * n
                if abs(pos - round(pos)) > 1e-9 or round(pos) < 1 or pos > n + 1e-9:
                    bad("t_eval", f"{t['t_eval']} is not a grid point for N={n}")
                    break
    elif cmd == "ml":
        if num("alpha") and not 0 < t["alpha"] <= 2:
            bad("alpha", "must lie in (0, 2]")
        if num("gamma") and not t["gamma"] > 0:
            bad("gamma", "must be positive")
        if num("t_max") and not t["t_max"] > 0:
            bad("t_max", "must be positive")
        if "n_grid" in t and _is_int(t["n_grid"]) and t["n_grid"] < 2:
            bad("n_grid", "must be >= 2")
    elif cmd == "check":
        if num("q") and not t["q"] > 2:
            bad("q", "must exceed 2")
        if num("eta") and not t["eta"] > 0:
            bad("eta", "must be positive")
    elif cmd == "counterexample":
        if num("alpha") and not 1 < t["alpha"] < 2:
            bad("alpha", "must lie in (1, 2)")
        if num("beta0") and not t["beta0"] > 0:
            bad("beta0", "must be positive")
        if num("x1") and num("x2") and t["x2"] < t["x1"]:
            bad("x2", "must be >= x1")


def read(path):
    """Return ``(text, table)``; raises :class:`ConfigError` for unreadable or malformed files."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([Diagnostic("<file>", f"cannot read {path}: {exc.strerror or exc}")]) from exc
    try:
        return text, tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError([Diagnostic("<syntax>", str(exc), int(m.group(1)) if m else None)]) from exc


def validate(path):
    """Diagnostics for the configuration at ``path``; an empty list means it is valid."""
    try:
        text, cfg = read(path)
    except ConfigError as exc:
        return exc.diagnostics
    return check_config(cfg, text)[0]


def load(path):
    """Parse and build an :class:`Experiment`, raising :class:`ConfigError` on diagnostics."""
    text, cfg = read(path)
    diags, exp = check_config(cfg, text)
    if diags:
        raise ConfigError(diags)
    return exp
