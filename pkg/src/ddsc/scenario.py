"""Scenario files: flat dotted-key text that drives the whole pipeline.

The format is one `key = value` assignment per line, `#` comments, no nesting.
Matrices are written row by row (`pattern.row1 = 0 1 1 0`), so files stay
diff-friendly and trivially parseable from any language. A `preset = <name>`
line splices in one of the bundled scenarios before the file's own
assignments, which therefore override preset values key by key.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError, UnsupportedChannelError
from .lti import CollectConfig, LtiSystem, SparsityPattern, make_mass_spring
from .synthesis import AlgoConfig

__all__ = ["Scenario", "parse_scenario", "parse_scenario_text", "preset_names"]

MODES = ("data-driven", "model-based-point-ellipsoid", "baseline-xdiag")
_MODE_ALIASES = {
    "data": "data-driven",
    "model": "model-based-point-ellipsoid",
    "baseline": "baseline-xdiag",
}
OBJECTIVES = ("stabilize", "h2", "hinf")

# Bundled scenarios, expressed in the scenario syntax itself so they exercise
# the same parser as user files.
_BENCH_CHANNELS = """\
channels.c.row1 = 1 0 0 0
channels.c.row2 = 0 1 0 0
channels.c.row3 = 0 0 1 0
channels.c.row4 = 0 0 0 1
channels.c.row5 = 0 0 0 0
channels.c.row6 = 0 0 0 0
channels.d.row1 = 0 0
channels.d.row2 = 0 0
channels.d.row3 = 0 0
channels.d.row4 = 0 0
channels.d.row5 = 1 0
channels.d.row6 = 0 1
"""

_PRESETS = {
    "paper.stab": """\
plant.builtin = mass-spring
plant.masses = 2
objective = stabilize
pattern.row1 = 0 1 1 0
pattern.row2 = 0 1 1 0
data.T = 100
data.Ts = 0.1
data.eps = 0.01
data.seed = 1
""",
    "paper.h2": """\
plant.builtin = mass-spring
plant.masses = 2
objective = h2
pattern.row1 = 1 1 0 0
pattern.row2 = 0 0 1 1
data.T = 100
data.Ts = 0.1
data.eps = 0.01
data.seed = 1
"""
    + _BENCH_CHANNELS,
    "paper.hinf": """\
plant.builtin = mass-spring
plant.masses = 2
objective = hinf
pattern.row1 = 0 0 1 1
pattern.row2 = 1 0 0 0
data.T = 100
data.Ts = 0.1
data.eps = 0.01
data.seed = 1
"""
    + _BENCH_CHANNELS
    + """\
channels.h.row1 = 0 0
channels.h.row2 = 0 0
channels.h.row3 = 0 0
channels.h.row4 = 0 0
channels.h.row5 = 1 0
channels.h.row6 = 0 1
""",
}


def preset_names():
    return sorted(_PRESETS)


@dataclass
class Scenario:
    """Everything one pipeline run needs, already validated."""

    plant: LtiSystem
    pattern: SparsityPattern
    objective: str
    data: CollectConfig
    algo: AlgoConfig
    mode: str = "data-driven"
    sweep_axis: str | None = None
    sweep_values: list | None = None
    sweep_seeds: tuple = (1, 2, 3, 4, 5)

    def channels(self):
        """Performance channel matrices (C, D, G, H) of the scenario plant."""
        p = self.plant
        return p.C, p.D, p.G, p.H


def _scan(text, origin):
    """Lines -> (lineno, key, value, origin) tuples, syntax errors located."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioError(f"{origin}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ScenarioError(f"{origin}:{lineno}: empty key or value")
        entries.append((lineno, key, value, origin))
    return entries


def _floats(value, where):
    try:
        return [float(v) for v in value.split()]
    except ValueError:
        raise ScenarioError(f"{where}: not a number list: {value!r}") from None


def _one_float(value, where):
    vals = _floats(value, where)
    if len(vals) != 1:
        raise ScenarioError(f"{where}: expected a single number")
    return vals[0]


def _one_int(value, where):
    f = _one_float(value, where)
    if f != int(f):
        raise ScenarioError(f"{where}: expected an integer")
    return int(f)


def _gather_matrix(rows, base, origin):
    """Assemble `base.rowK` entries into one matrix, checking shape as we go."""
    if not rows:
        return None
    indexed = {}
    for lineno, key, value, src in rows:
        where = f"{src}:{lineno}"
        suffix = key.rsplit(".", 1)[1]
        if not suffix.startswith("row") or not suffix[3:].isdigit():
            raise ScenarioError(f"{where}: expected {base}.row<k>, got {key!r}")
        indexed[int(suffix[3:])] = (where, _floats(value, where))
    expect = sorted(indexed)
    if expect != list(range(1, len(expect) + 1)):
        raise ScenarioError(f"{origin}: {base} rows must be row1..row{len(expect)}")
    width = len(indexed[1][1])
    for k in expect:
        where, vals = indexed[k]
        if len(vals) != width:
            raise ScenarioError(
                f"{where}: {base}.row{k} has {len(vals)} entries, expected {width}"
            )
    return np.array([indexed[k][1] for k in expect])


_SCALAR_KEYS = {
    "objective",
    "mode",
    "plant.builtin",
    "plant.masses",
    "data.T",
    "data.Ts",
    "data.eps",
    "data.seed",
    "data.amplitude",
    "algo.beta0",
    "algo.mu",
    "algo.beta_cap",
    "algo.eps_T",
    "algo.eta",
    "algo.max_iter",
    "sweep.eps",
    "sweep.T",
    "sweep.seeds",
}
_MATRIX_BASES = (
    "pattern",
    "plant.a",
    "plant.b",
    "channels.c",
    "channels.d",
    "channels.g",
    "channels.h",
)


def parse_scenario(path):
    """Parse a scenario file from disk."""
    with open(path) as fh:
        return parse_scenario_text(fh.read(), origin=str(path))


def parse_scenario_text(text, origin="<scenario>"):
    entries = _scan(text, origin)

    presets = [e for e in entries if e[1] == "preset"]
    if len(presets) > 1:
        raise ScenarioError(f"{origin}:{presets[1][0]}: more than one preset")
    if presets:
        lineno, _, name, _ = presets[0]
        if name not in _PRESETS:
            known = ", ".join(preset_names())
            raise ScenarioError(f"{origin}:{lineno}: unknown preset {name!r} (have {known})")
        entries = _scan(_PRESETS[name], f"preset {name}") + [
            e for e in entries if e[1] != "preset"
        ]

    scalars = {}
    matrix_rows = {base: [] for base in _MATRIX_BASES}
    for lineno, key, value, src in entries:
        base = key.rsplit(".", 1)[0] if "." in key else key
        if base in matrix_rows:
            # later assignments to the same row override earlier (preset) ones
            matrix_rows[base] = [e for e in matrix_rows[base] if e[1] != key]
            matrix_rows[base].append((lineno, key, value, src))
        elif key in _SCALAR_KEYS:
            scalars[key] = (lineno, value, src)
        else:
            raise ScenarioError(f"{src}:{lineno}: unknown key {key!r}")

    def scalar(key, default=None):
        if key not in scalars:
            return default
        return scalars[key][1]

    def where_of(key):
        if key not in scalars:
            return origin
        lineno, _, src = scalars[key]
        return f"{src}:{lineno}"

    mats = {
        base: _gather_matrix(rows, base, origin) for base, rows in matrix_rows.items()
    }

    plant = _build_plant(mats, scalars, origin)

    pattern_mat = mats["pattern"]
    if pattern_mat is None:
        raise ScenarioError(f"{origin}: missing pattern rows (pattern.row1 = ...)")
    try:
        pattern = SparsityPattern(pattern_mat)
    except ValueError as exc:
        raise ScenarioError(f"{origin}: {exc}") from None
    if pattern.shape != (plant.n_inputs, plant.n_states):
        raise ScenarioError(
            f"{origin}: pattern shape {pattern.shape} does not match the "
            f"({plant.n_inputs}, {plant.n_states}) gain"
        )

    objective = scalar("objective")
    if objective is None:
        raise ScenarioError(f"{origin}: missing objective (stabilize, h2, or hinf)")
    if objective not in OBJECTIVES:
        raise ScenarioError(f"{where_of('objective')}: unknown objective {objective!r}")
    if objective == "h2" and np.any(plant.H != 0.0):
        raise UnsupportedChannelError(
            f"{origin}: the h2 objective requires zero disturbance feedthrough H"
        )

    mode = scalar("mode", "data-driven")
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ScenarioError(f"{where_of('mode')}: unknown mode {mode!r}")

    try:
        data = CollectConfig(
            T=_one_int(scalar("data.T", "100"), where_of("data.T")),
            Ts=_one_float(scalar("data.Ts", "0.1"), where_of("data.Ts")),
            eps=_one_float(scalar("data.eps", "0.01"), where_of("data.eps")),
            seed=_one_int(scalar("data.seed", "1"), where_of("data.seed")),
            amplitude=_one_float(
                scalar("data.amplitude", "1.0"), where_of("data.amplitude")
            ),
        )
        algo = AlgoConfig(
            beta0=_one_float(scalar("algo.beta0", "1.0"), where_of("algo.beta0")),
            mu=_one_float(scalar("algo.mu", "2.0"), where_of("algo.mu")),
            beta_cap=_one_float(
                scalar("algo.beta_cap", "1e6"), where_of("algo.beta_cap")
            ),
            eps_T=_one_float(scalar("algo.eps_T", "0.01"), where_of("algo.eps_T")),
            eta=_one_float(scalar("algo.eta", "1e-6"), where_of("algo.eta")),
            max_iter=_one_int(scalar("algo.max_iter", "100"), where_of("algo.max_iter")),
        )
    except ValueError as exc:
        raise ScenarioError(f"{origin}: {exc}") from None

    sweep_axis = sweep_values = None
    if "sweep.eps" in scalars and "sweep.T" in scalars:
        raise ScenarioError(f"{where_of('sweep.T')}: sweep.eps and sweep.T conflict")
    for axis in ("eps", "T"):
        key = f"sweep.{axis}"
        if key in scalars:
            sweep_axis = axis
            sweep_values = _floats(scalar(key), where_of(key))
            if not sweep_values:
                raise ScenarioError(f"{where_of(key)}: empty sweep values")
    seeds = (1, 2, 3, 4, 5)
    if "sweep.seeds" in scalars:
        seeds = tuple(
            int(v) for v in _floats(scalar("sweep.seeds"), where_of("sweep.seeds"))
        )

    return Scenario(
        plant=plant,
        pattern=pattern,
        objective=objective,
        data=data,
        algo=algo,
        mode=mode,
        sweep_axis=sweep_axis,
        sweep_values=sweep_values,
        sweep_seeds=seeds,
    )


def _build_plant(mats, scalars, origin):
    explicit = mats["plant.a"] is not None or mats["plant.b"] is not None
    builtin = scalars.get("plant.builtin")
    if explicit and builtin is not None:
        raise ScenarioError(
            f"{builtin[2]}:{builtin[0]}: plant.builtin conflicts with explicit plant rows"
        )

    if explicit:
        A, B = mats["plant.a"], mats["plant.b"]
        if A is None or B is None:
            raise ScenarioError(f"{origin}: explicit plants need both plant.a and plant.b")
        base = LtiSystem(
            A=A,
            B=B,
            G=B.copy(),
            C=np.eye(A.shape[0]),
            D=np.zeros((A.shape[0], B.shape[1])),
            H=np.zeros((A.shape[0], B.shape[1])),
        )
    else:
        name = builtin[1] if builtin is not None else "mass-spring"
        if name != "mass-spring":
            raise ScenarioError(f"{origin}: unknown builtin plant {name!r}")
        masses = 2
        if "plant.masses" in scalars:
            lineno, value, src = scalars["plant.masses"]
            masses = _one_int(value, f"{src}:{lineno}")
        base = make_mass_spring(masses)

    C = mats["channels.c"] if mats["channels.c"] is not None else base.C
    D = mats["channels.d"]
    H = mats["channels.h"]
    G = mats["channels.g"] if mats["channels.g"] is not None else base.G
    if D is None:
        D = np.zeros((C.shape[0], base.n_inputs))
    if H is None:
        H = np.zeros((C.shape[0], G.shape[1]))
    try:
        return LtiSystem(A=base.A, B=base.B, G=G, C=C, D=D, H=H)
    except ValueError as exc:
        raise ScenarioError(f"{origin}: {exc}") from None
