"""Run configuration: a JSON document validated into typed settings.

Example (every key except the first four has a default)::

    {
      "benchmark": "quad",
      "gp": [
        {"lengthscales": [1.0, 1.0], "signal_variance": 4.0, "prior_mean": -2.0},
        {"lengthscales": [0.8, 0.8], "signal_variance": 4.0},
        {"lengthscales": [0.6, 0.6], "signal_variance": 4.0}
      ],
      "beta": 2.0,
      "j_min": 0.0,
      "algorithm": "reform",
      "seed": 0,
      "reform": {"eps_x": 0.001, "eps_f": 0.001, "max_iterations": 40,
                 "subproblem": {"initial_mesh": 0.25, "mesh_tolerance": 1e-4}},
      "grid": {"counts": [31, 31], "max_iterations": 40},
      "problem": {"noise_std": 0.0}
    }

``gp`` lists the objective GP first, then one GP per constraint.  Errors are
reported as :class:`~safeopt_ps.errors.ConfigError` with the offending field
path and, when it can be located, the line number in the file.
"""

import copy
import json
import re
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError
from .gp import KernelSpec
from .model import GpConfig, ModelConfig
from .pattern_search import PsConfig
from .reform import ReformConfig

BENCHMARKS = ("quad", "pid")
ALGORITHMS = ("reform", "grid")
REQUIRED = ("benchmark", "gp", "j_min", "beta")

_DEFAULTS = {
    "quad": {
        "benchmark": "quad",
        "algorithm": "reform",
        "gp": [
            {"lengthscales": [1.0, 1.0], "signal_variance": 4.0, "prior_mean": -2.0},
            {"lengthscales": [0.8, 0.8], "signal_variance": 4.0},
            {"lengthscales": [0.6, 0.6], "signal_variance": 4.0},
        ],
        "beta": 2.0,
        "j_min": 0.0,
        "seed": 0,
        "reform": {"eps_x": 1e-3, "eps_f": 1e-3, "max_iterations": 60},
        "grid": {"counts": [31, 31], "max_iterations": 60},
        "problem": {"noise_std": 0.0},
    },
    "pid": {
        "benchmark": "pid",
        "algorithm": "reform",
        "gp": [
            {"lengthscales": [30.0, 15.0, 15.0], "signal_variance": 250000.0,
             "prior_mean": -300.0, "noise_variance": 1e-4},
            {"lengthscales": [15.0, 2.0, 8.0], "signal_variance": 25.0,
             "noise_variance": 1e-6},
        ],
        "beta": 2.0,
        "j_min": 0.0,
        "seed": 0,
        "reform": {"eps_x": 0.1, "eps_f": 0.1, "max_iterations": 30},
        "grid": {"counts": [12, 11, 11], "max_iterations": 30},
        "problem": {"noise_std": 0.0, "plant": {}, "tuning": {}},
    },
}


def default_config(benchmark):
    if benchmark not in _DEFAULTS:
        raise ConfigError("benchmark", f"unknown benchmark {benchmark!r}")
    return copy.deepcopy(_DEFAULTS[benchmark])


@dataclass
class RunConfig:
    benchmark: str
    algorithm: str
    model: ModelConfig
    reform: ReformConfig
    grid_counts: tuple
    grid_iterations: int
    seed: int = 0
    problem: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def echo(self):
        """The validated document, with defaults filled in, for run summaries."""
        return copy.deepcopy(self.raw)


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _build(cls, data, path, err, renames=None):
    if not isinstance(data, dict):
        raise err(path, "expected an object")
    names = {f.name for f in fields(cls)}
    kw = {}
    for k, v in data.items():
        name = (renames or {}).get(k, k)
        if name not in names:
            raise err(f"{path}.{k}", "unknown key")
        kw[name] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise err(path, str(exc)) from None


def parse_config(doc, text=None, require=True):
    """Validate a decoded JSON object into a :class:`RunConfig`."""

    def err(path, msg):
        return ConfigError(path, msg, _line_of(text, path.split(".")[-1].split("[")[0]))

    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object", 1)
    if require:
        for key in REQUIRED:
            if key not in doc:
                raise ConfigError(key, "missing required field")
    bench = doc.get("benchmark")
    if bench not in BENCHMARKS:
        raise err("benchmark", f"must be one of {BENCHMARKS}")
    full = _merge(_DEFAULTS[bench], doc)
    unknown = set(full) - set(_DEFAULTS[bench]) - {"sweep", "width_indices"}
    if unknown:
        k = sorted(unknown)[0]
        raise err(k, "unknown key")
    if full["algorithm"] not in ALGORITHMS:
        raise err("algorithm", f"must be one of {ALGORITHMS}")
    dim = 2 if bench == "quad" else 3
    n_out = 3 if bench == "quad" else 2
    gps = full["gp"]
    if not isinstance(gps, list) or len(gps) != n_out:
        raise err("gp", f"expected a list of {n_out} GP settings (objective first)")
    gp_cfgs = []
    for i, g in enumerate(gps):
        path = f"gp[{i}]"
        if not isinstance(g, dict) or "lengthscales" not in g:
            raise err(path, "needs at least 'lengthscales'")
        extra = set(g) - {"lengthscales", "signal_variance", "noise_variance", "prior_mean", "family"}
        if extra:
            raise err(f"{path}.{sorted(extra)[0]}", "unknown key")
        try:
            kern = KernelSpec(
                g["lengthscales"], g.get("signal_variance", 1.0), g.get("family", "sqexp")
            )
            if kern.dim != dim:
                raise ValueError(f"expected {dim} lengthscales")
            gp_cfgs.append(GpConfig(kern, float(g.get("noise_variance", 1e-6)),
                                    float(g.get("prior_mean", 0.0))))
        except (TypeError, ValueError) as exc:
            raise err(path, str(exc)) from None
        if gp_cfgs[-1].noise_variance < 0:
            raise err(f"{path}.noise_variance", "must be nonnegative")
    try:
        beta = float(full["beta"])
        j_min = float(full["j_min"])
        model = ModelConfig(tuple(gp_cfgs), beta, j_min, full.get("width_indices"))
    except (TypeError, ValueError) as exc:
        raise err("beta", str(exc)) from None

    rdoc = dict(full.get("reform", {}))
    sub = rdoc.pop("subproblem", {})
    if not isinstance(sub, dict):
        raise err("reform.subproblem", "expected an object")
    sub = {**asdict(ReformConfig().subproblem), **sub}
    ps = _build(PsConfig, sub, "reform.subproblem", err)
    rdoc["subproblem"] = ps
    rdoc.setdefault("seed", int(full.get("seed", 0)))
    reform = _build(ReformConfig, rdoc, "reform", err)

    gdoc = full.get("grid", {})
    counts = gdoc.get("counts")
    if not isinstance(counts, list) or len(counts) != dim or any(
        not isinstance(c, int) or c < 1 for c in counts
    ):
        raise err("counts", f"grid.counts must list {dim} positive integers")
    iters = gdoc.get("max_iterations", reform.max_iterations)
    if not isinstance(iters, int) or iters < 1:
        raise err("max_iterations", "grid.max_iterations must be a positive integer")

    seed = full.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise err("seed", "must be a nonnegative integer")
    problem = full.get("problem", {})
    if not isinstance(problem, dict):
        raise err("problem", "expected an object")
    if float(problem.get("noise_std", 0.0)) < 0:
        raise err("noise_std", "must be nonnegative")
    sweep = full.get("sweep", {})
    if not isinstance(sweep, dict):
        raise err("sweep", "expected an object")
    for key, vals in sweep.items():
        if key not in ("mesh_tolerance", "initial_mesh", "eps"):
            raise err(f"sweep.{key}", "unknown sweep axis")
        if not isinstance(vals, list) or not vals:
            raise err(f"sweep.{key}", "expected a nonempty list")
    return RunConfig(bench, full["algorithm"], model, reform, tuple(counts), iters,
                     seed, problem, sweep, full)


def load_config(path):
    """Read and validate a JSON config file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<syntax>", exc.msg, exc.lineno) from None
    return parse_config(doc, text)


def resolve(path, benchmark, seed=None):
    """Config for a subcommand: the file at ``path`` or the built-in defaults."""
    if path is None:
        cfg = parse_config(default_config(benchmark), require=False)
    else:
        cfg = load_config(path)
        if benchmark is not None and cfg.benchmark != benchmark:
            raise ConfigError("benchmark", f"config is for {cfg.benchmark!r}, not {benchmark!r}")
    if seed is not None:
        cfg = with_seed(cfg, seed)
    return cfg


def with_seed(cfg, seed):
    raw = copy.deepcopy(cfg.raw)
    raw["seed"] = int(seed)
    raw.setdefault("reform", {})["seed"] = int(seed)
    return parse_config(raw, require=False)
