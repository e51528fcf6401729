"""On-disk formats: GridTensor datasets, run configs and chain CSVs.

GridTensor is a line-oriented text format::

    GRIDTENSOR v1
    dims S T N
    axis 1D|2D
    components u [v ...]
    x <coordinates>
    y <coordinates>            (2D only; S = len(x) * len(y), x fastest)
    t <coordinates>
    sentinel -9999.0
    values
    <S values>                 one line per (n, t), n outer
    mask
    <S characters 0/1>         one line per (n, t)
    end

Floats are written with ``repr`` so a round trip is lossless.
"""

import csv
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .sampler import ChainSamples, ModelConfig

MAGIC = "GRIDTENSOR v1"
SENTINEL = -9999.0


class FormatError(ValueError):
    pass


class ConfigError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


# ---------------------------------------------------------------------------
# GridTensor


@dataclass
class GridTensor:
    data: np.ndarray  # (S, T, N), NaN where missing
    mask: np.ndarray  # (S, T, N) bool
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray | None = None
    component_names: tuple = ("u",)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.times = np.asarray(self.times, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = None if self.ys is None else np.asarray(self.ys, dtype=float)
        self.component_names = tuple(self.component_names)
        S, T, N = self.data.shape
        ns = len(self.xs) * (1 if self.ys is None else len(self.ys))
        if ns != S or len(self.times) != T or len(self.component_names) != N:
            raise FormatError(f"coordinates do not match dims {self.data.shape}")
        if self.mask.shape != self.data.shape:
            raise FormatError("mask shape differs from data shape")
        for name, c in (("x", self.xs), ("y", self.ys), ("t", self.times)):
            if c is not None and len(c) > 1 and np.any(np.diff(c) <= 0):
                raise FormatError(f"{name} coordinates must be strictly increasing")

    @property
    def axis(self):
        return "1D" if self.ys is None else "2D"

    @property
    def dims(self):
        return self.data.shape


def _fmt(values):
    return " ".join(repr(float(v)) for v in values)


def write_gridtensor(path, gt):
    S, T, N = gt.dims
    lines = [
        MAGIC,
        f"dims {S} {T} {N}",
        f"axis {gt.axis}",
        "components " + " ".join(gt.component_names),
        "x " + _fmt(gt.xs),
    ]
    if gt.ys is not None:
        lines.append("y " + _fmt(gt.ys))
    lines += ["t " + _fmt(gt.times), f"sentinel {SENTINEL!r}", "values"]
    vals = np.where(gt.mask, gt.data, SENTINEL)
    for n in range(N):
        for t in range(T):
            lines.append(_fmt(vals[:, t, n]))
    lines.append("mask")
    m = gt.mask.astype(np.uint8)
    for n in range(N):
        for t in range(T):
            lines.append("".join("1" if b else "0" for b in m[:, t, n]))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def read_gridtensor(path):
    try:
        lines = Path(path).read_text().splitlines()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text file") from exc
    it = iter(enumerate(lines, 1))

    def take(keyword):
        try:
            lineno, line = next(it)
        except StopIteration:
            raise FormatError(f"{path}: unexpected end of file, expected {keyword!r}") from None
        head, _, rest = line.partition(" ")
        if head != keyword:
            raise FormatError(f"{path}:{lineno}: expected {keyword!r}, got {line[:40]!r}")
        return rest

    def floats(text, count, what):
        try:
            v = np.array([float(x) for x in text.split()])
        except ValueError as exc:
            raise FormatError(f"{path}: bad number in {what}") from exc
        if len(v) != count:
            raise FormatError(f"{path}: {what} has {len(v)} entries, expected {count}")
        return v

    try:
        _, first = next(it)
    except StopIteration:
        raise FormatError(f"{path}: empty file") from None
    if first.strip() != MAGIC:
        raise FormatError(f"{path}: missing {MAGIC!r} header")
    try:
        S, T, N = (int(x) for x in take("dims").split())
    except ValueError as exc:
        raise FormatError(f"{path}: dims needs three integers") from exc
    axis = take("axis").strip()
    if axis not in ("1D", "2D"):
        raise FormatError(f"{path}: axis must be 1D or 2D")
    comps = tuple(take("components").split())
    if len(comps) != N:
        raise FormatError(f"{path}: {len(comps)} component names for N={N}")
    xs_text = take("x")
    xs = np.array([float(x) for x in xs_text.split()])
    ys = None
    if axis == "2D":
        ys = np.array([float(x) for x in take("y").split()])
    if len(xs) * (1 if ys is None else len(ys)) != S:
        raise FormatError(f"{path}: axis coordinates do not multiply to S={S}")
    times = floats(take("t"), T, "t")
    sentinel = float(take("sentinel"))
    take("values")
    data = np.empty((S, T, N))
    for n in range(N):
        for t in range(T):
            data[:, t, n] = floats(next(it, (0, ""))[1], S, "values line")
    take("mask")
    mask = np.empty((S, T, N), dtype=bool)
    for n in range(N):
        for t in range(T):
            row = next(it, (0, ""))[1].strip()
            if len(row) != S or set(row) - {"0", "1"}:
                raise FormatError(f"{path}: malformed mask line")
            mask[:, t, n] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("1")
    take("end")
    if np.any(~mask & (data != sentinel)):
        raise FormatError(f"{path}: masked entries must hold the sentinel")
    data = np.where(mask, data, np.nan)
    return GridTensor(data, mask, times, xs, ys, comps)


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    dataset: Path
    covariates: list
    spatial_count: tuple  # (Px,) or (Px, Py)
    temporal_count: int
    degree: int | None
    library_terms: list | None
    standard: dict | None
    operator: object  # "identity", "laplacian" or list of [coef, deriv]
    model: ModelConfig
    output_dir: Path | None
    source: str = ""
    margin: int = 0

    def digest(self):
        return hashlib.sha256(self.source.encode()).hexdigest()


_MODEL_FIELDS = {f.name for f in dataclasses.fields(ModelConfig)}


def _get(section, key, types, field, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(field, "is required")
        return default
    v = section[key]
    if not isinstance(v, types) or isinstance(v, bool) and bool not in np.atleast_1d(types).tolist():
        raise ConfigError(field, f"has the wrong type ({type(v).__name__})")
    return v


def load_config(path):
    """Parse and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML: {exc}") from exc
    known = {"data", "basis", "model", "sampler", "output"}
    for k in raw:
        if k not in known:
            raise ConfigError(k, "unknown section")
    base = path.parent

    data = raw.get("data", {})
    ds = _get(data, "path", str, "data.path", required=True)
    dataset = (base / ds).resolve()
    if not dataset.exists():
        raise ConfigError("data.path", f"dataset {dataset} does not exist")
    covs = []
    for c in _get(data, "covariates", list, "data.covariates", default=[]):
        p = (base / c).resolve()
        if not p.exists():
            raise ConfigError("data.covariates", f"covariate file {p} does not exist")
        covs.append(p)

    basis = raw.get("basis", {})
    sc = _get(basis, "spatial_count", (int, list), "basis.spatial_count", required=True)
    sc = (sc,) if isinstance(sc, int) else tuple(sc)
    if not sc or len(sc) > 2 or any(not isinstance(x, int) or x < 2 for x in sc):
        raise ConfigError("basis.spatial_count", "must be an integer or a list of one or two integers >= 2")
    tc = _get(basis, "temporal_count", int, "basis.temporal_count", required=True)
    if tc < 2:
        raise ConfigError("basis.temporal_count", "must be >= 2")
    degree = _get(basis, "degree", int, "basis.degree")
    if degree is not None and degree < 1:
        raise ConfigError("basis.degree", "must be >= 1")

    model = raw.get("model", {})
    terms = _get(model, "library", list, "model.library")
    standard = _get(model, "standard", dict, "model.standard")
    if (terms is None) == (standard is None):
        raise ConfigError("model", "give exactly one of 'library' or 'standard'")
    if standard is not None:
        allowed = {"max_power", "derivs", "interaction_power", "interaction_derivs", "cross_interactions"}
        for k in standard:
            if k not in allowed:
                raise ConfigError(f"model.standard.{k}", "unknown key")
        if "derivs" not in standard or "max_power" not in standard:
            raise ConfigError("model.standard", "needs 'max_power' and 'derivs'")
    operator = model.get("operator", "identity")
    if not (operator in ("identity", "laplacian") or isinstance(operator, list)):
        raise ConfigError("model.operator", "must be 'identity', 'laplacian' or a list of [coef, derivative]")

    margin = _get(model, "margin", int, "model.margin", default=0)
    if margin < 0:
        raise ConfigError("model.margin", "must be >= 0")

    sampler = dict(raw.get("sampler", {}))
    for k in sampler:
        if k not in _MODEL_FIELDS:
            raise ConfigError(f"sampler.{k}", "unknown key")
    if "kappa" in sampler and isinstance(sampler["kappa"], list):
        sampler["kappa"] = tuple(sampler["kappa"])
    for k in ("lhs_time_order",):
        if k in model:
            sampler[k] = model[k]
    try:
        mcfg = ModelConfig(**sampler)
    except (TypeError, ValueError) as exc:
        raise ConfigError("sampler", str(exc)) from exc

    out = raw.get("output", {})
    od = _get(out, "dir", str, "output.dir")
    return RunConfig(
        dataset=dataset,
        covariates=covs,
        spatial_count=sc,
        temporal_count=tc,
        degree=degree,
        library_terms=terms,
        standard=standard,
        operator=operator,
        model=mcfg,
        output_dir=None if od is None else (base / od).resolve(),
        source=text,
        margin=margin,
    )


# ---------------------------------------------------------------------------
# chains

CHAIN_HEADER = ["iteration", "parameter", "component", "term", "value"]


def write_chain(path, samples):
    comps = list(samples.component_names)
    terms = list(samples.term_names)
    with open(path, "w", newline="") as fh:
        fh.write(f"# burn_in={samples.burn_in}\n")
        fh.write("# components=" + ";".join(comps) + "\n")
        fh.write("# terms=" + ";".join(terms) + "\n")
        if samples.subsample is not None:
            fh.write(f"# subsample={samples.subsample}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHAIN_HEADER)
        for it in range(len(samples)):
            for n, c in enumerate(comps):
                for d, t in enumerate(terms):
                    w.writerow([it, "M", c, t, repr(float(samples.M[it, n, d]))])
                for d, t in enumerate(terms):
                    w.writerow([it, "gamma", c, t, int(samples.gamma[it, n, d])])
                w.writerow([it, "pi", c, "", repr(float(samples.pi[it, n]))])
                w.writerow([it, "sigma2_U", c, "", repr(float(samples.sigma2_U[it, n]))])
                w.writerow([it, "sigma2_V", c, "", repr(float(samples.sigma2_V[it, n]))])


def read_chain(path):
    meta = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"cannot read chain {path}: {exc.strerror}") from exc
    with fh:
        rows = []
        reader = None
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v
                continue
            reader = csv.reader([line] + list(fh))
            break
        if reader is None:
            raise FormatError(f"{path}: no chain rows")
        header = next(reader)
        if header != CHAIN_HEADER:
            raise FormatError(f"{path}: unexpected header {header}")
        rows = list(reader)
    try:
        burn = int(meta["burn_in"])
        comps = meta["components"].split(";")
        terms = meta["terms"].split(";")
    except KeyError as exc:
        raise FormatError(f"{path}: missing metadata {exc}") from None
    ci = {c: i for i, c in enumerate(comps)}
    ti = {t: i for i, t in enumerate(terms)}
    try:
        L = max(int(r[0]) for r in rows) + 1 if rows else 0
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row") from exc
    N, D = len(comps), len(terms)
    out = ChainSamples(
        M=np.zeros((L, N, D)),
        gamma=np.zeros((L, N, D), dtype=bool),
        pi=np.zeros((L, N)),
        sigma2_U=np.zeros((L, N)),
        sigma2_V=np.zeros((L, N)),
        burn_in=burn,
        term_names=terms,
        component_names=comps,
        subsample=int(meta["subsample"]) if "subsample" in meta else None,
    )
    seen = np.zeros(L, dtype=int)
    for r in rows:
        try:
            it, par, comp, term, val = int(r[0]), r[1], r[2], r[3], float(r[4])
            n = ci[comp]
            if par == "M":
                out.M[it, n, ti[term]] = val
            elif par == "gamma":
                out.gamma[it, n, ti[term]] = val != 0
            elif par in ("pi", "sigma2_U", "sigma2_V"):
                getattr(out, par)[it, n] = val
            else:
                raise FormatError(f"{path}: unknown parameter {par!r}")
        except (ValueError, IndexError, KeyError) as exc:
            raise FormatError(f"{path}: malformed row {r}") from exc
        seen[it] += 1
    if np.any(seen != N * (2 * D + 3)):
        raise FormatError(f"{path}: incomplete iterations in chain")
    return out


def write_summary(out_dir, summary):
    out_dir = Path(out_dir)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "term", "inclusion", "mean", "hpd_lo", "hpd_hi", "n_included", "selected"])
        for t in summary.terms:
            w.writerow(
                [
                    t.component,
                    t.term,
                    repr(t.inclusion),
                    repr(t.mean),
                    repr(t.hpd_lo),
                    repr(t.hpd_hi),
                    t.n_included,
                    int(t.inclusion > summary.threshold),
                ]
            )
    text = "\n".join(summary.equations[c] for c in summary.equations) + "\n"
    (out_dir / "equations.txt").write_text(text)
    return text


def write_manifest(path, info):
    Path(path).write_text(json.dumps(info, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.ndarray, tuple)):
        return list(x)
    if isinstance(x, Path):
        return str(x)
    return str(x)
