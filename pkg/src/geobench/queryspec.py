"""Query template registry and statistics-driven parameter generation.

Templates are authored per dialect in a YAML file; placeholders are ":name"
tokens bound to typed parameter kinds. The parameter generator draws values
from the statistical properties of the target dataset (time extent, bbox,
feature names) so that generated queries are realistic for that dataset.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import yaml

from .core import GeoBenchError, GeoPoint, Period, from_us, iso_utc
from .datagen import DatasetStats

CATEGORIES = ("temporal", "spatial", "spatiotemporal")

_PERIOD_DURATION_US = {
    "period_short": 3_600 * 1_000_000,
    "period_medium": 86_400 * 1_000_000,
    "period_long": 7 * 86_400 * 1_000_000,
}

_SIMPLE_KINDS = frozenset(_PERIOD_DURATION_US) | {
    "point_sample", "radius", "hour_of_day", "min_regions", "harbor_pair",
}

_PLACEHOLDER_RE = re.compile(r"(?<!:):([a-z_][a-z0-9_]*)")

RADIUS_RANGE_M = (1_000.0, 10_000.0)
DEFAULT_MIN_REGIONS = 3
MAX_DISTINCT_ATTEMPTS = 10_000


class TemplateError(GeoBenchError):
    """Malformed template file or rendering failure."""


class ParamGenError(GeoBenchError):
    """Parameter generation cannot satisfy the template against the dataset."""


@dataclass(frozen=True)
class ParamKind:
    base: str
    region_kind: Optional[str] = None

    @staticmethod
    def parse(text: str) -> "ParamKind":
        m = re.fullmatch(r"region_name\((\w+)\)", text.strip())
        if m:
            return ParamKind("region_name", m.group(1))
        if text.strip() in _SIMPLE_KINDS:
            return ParamKind(text.strip())
        raise TemplateError(f"unknown parameter kind: {text!r}")

    def __str__(self) -> str:
        if self.base == "region_name":
            return f"region_name({self.region_kind})"
        return self.base


@dataclass(frozen=True)
class ParamDecl:
    name: str
    kind: ParamKind


ParamValue = Union[Period, str, GeoPoint, float, int, tuple]


@dataclass(frozen=True, eq=True)
class ParamSet:
    """One concrete binding of a template's parameters."""

    id: int
    values: dict[str, ParamValue]

    def key(self) -> tuple:
        """Hashable identity of the value map, used for distinctness."""
        out = []
        for name in sorted(self.values):
            v = self.values[name]
            if isinstance(v, Period):
                out.append((name, v.start_us, v.end_us))
            elif isinstance(v, GeoPoint):
                out.append((name, v.lon, v.lat))
            else:
                out.append((name, v))
        return tuple(out)


@dataclass(frozen=True)
class QueryTemplate:
    name: str
    enabled: bool
    category: str
    dialect_texts: dict[str, str]
    repetition: int
    parameters: tuple[ParamDecl, ...]
    constants: dict[str, float] = field(default_factory=dict)

    def param(self, name: str) -> ParamDecl:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class QueryInstance:
    """One (template, parameter set) pair; dialect text renders lazily."""

    template: QueryTemplate
    param_set: ParamSet

    @property
    def name(self) -> str:
        return self.template.name

    @property
    def canonical_id(self) -> str:
        return self.template.name

    @property
    def param_set_id(self) -> int:
        return self.param_set.id


class TemplateRegistry:
    """Validated templates plus per-dialect encoder styles."""

    def __init__(self, templates: Sequence[QueryTemplate],
                 dialect_styles: Optional[dict[str, dict[str, str]]] = None):
        self.templates = list(templates)
        self.dialect_styles = dialect_styles or {}
        self._by_name = {t.name: t for t in self.templates}

    def __len__(self) -> int:
        return len(self.templates)

    def get(self, name: str) -> QueryTemplate:
        try:
            return self._by_name[name]
        except KeyError:
            raise TemplateError(f"unknown template: {name!r}")

    def enabled(self) -> list[QueryTemplate]:
        return [t for t in self.templates if t.enabled]

    def render(self, template: Union[str, QueryTemplate], dialect: str, ps: ParamSet) -> str:
        if isinstance(template, str):
            template = self.get(template)
        style = self.dialect_styles.get(dialect, {})
        return render_query(template, dialect, ps, period_style=style.get("period", "between"))


# ---------------------------------------------------------------------------
# loading


def _parse_template_entry(entry: dict, params_section: dict[str, str]) -> QueryTemplate:
    known = {"name", "use", "type", "repetition", "parameters", "constants"}
    name = entry.get("name")
    if not name or not isinstance(name, str):
        raise TemplateError(f"template entry without a name: {entry!r}")
    category = entry.get("type")
    if category not in CATEGORIES:
        raise TemplateError(f"template {name!r}: bad type {category!r}")
    repetition = entry.get("repetition", 50)
    if not isinstance(repetition, int) or repetition < 1:
        raise TemplateError(f"template {name!r}: repetition must be >= 1")
    raw_params = entry.get("parameters") or []
    decls = []
    for pname in raw_params:
        kind_text = params_section.get(pname, pname)
        try:
            kind = ParamKind.parse(kind_text)
        except TemplateError:
            raise TemplateError(
                f"template {name!r}: parameter {pname!r} has no known kind "
                f"(bind it in the params section)")
        decls.append(ParamDecl(pname, kind))
    if len({d.name for d in decls}) != len(decls):
        raise TemplateError(f"template {name!r}: duplicate parameter names")
    dialects = {k: v for k, v in entry.items()
                if k not in known and isinstance(v, str)}
    if not dialects:
        raise TemplateError(f"template {name!r}: no dialect texts")
    declared = {d.name for d in decls}
    used: set[str] = set()
    for dialect, text in dialects.items():
        for ph in _PLACEHOLDER_RE.findall(text):
            if ph not in declared:
                raise TemplateError(
                    f"template {name!r}: dialect {dialect!r} uses undeclared placeholder :{ph}")
            used.add(ph)
    unused = declared - used
    if unused:
        raise TemplateError(
            f"template {name!r}: declared parameters never used: {sorted(unused)}")
    constants = dict(entry.get("constants") or {})
    return QueryTemplate(
        name=name, enabled=bool(entry.get("use", True)), category=category,
        dialect_texts=dialects, repetition=repetition,
        parameters=tuple(decls), constants=constants,
    )


def parse_templates(doc, source: str = "<template file>") -> TemplateRegistry:
    if doc is None:
        return TemplateRegistry([])
    if isinstance(doc, list):
        entries, params_section, dialect_styles = doc, {}, {}
    elif isinstance(doc, dict):
        entries = doc.get("templates") or []
        params_section = doc.get("params") or {}
        dialect_styles = doc.get("dialects") or {}
    else:
        raise TemplateError(f"{source}: expected a list or a mapping at top level")
    templates = []
    names = set()
    for entry in entries:
        t = _parse_template_entry(entry, params_section)
        if t.name in names:
            raise TemplateError(f"{source}: duplicate template name {t.name!r}")
        names.add(t.name)
        templates.append(t)
    return TemplateRegistry(templates, dialect_styles)


def load_templates(path: str) -> TemplateRegistry:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise TemplateError(f"{path}: invalid YAML: {exc}") from exc
    return parse_templates(doc, source=path)


def default_templates_path(scenario: str) -> str:
    """Path of the packaged template file for a scenario."""
    import os

    path = os.path.join(os.path.dirname(__file__), "data", f"templates_{scenario}.yaml")
    if not os.path.exists(path):
        raise TemplateError(f"no packaged templates for scenario {scenario!r}")
    return path


# ---------------------------------------------------------------------------
# parameter generation


def _draw_value(kind: ParamKind, stats: DatasetStats, rng: np.random.Generator) -> ParamValue:
    if kind.base in _PERIOD_DURATION_US:
        dur = _PERIOD_DURATION_US[kind.base]
        ext0, ext1 = stats.time_extent.start_us, stats.time_extent.end_us
        latest = ext1 - dur
        if latest > ext0:
            start = int(rng.integers(ext0, latest + 1))
        else:
            # duration does not fit the extent: keep starts varying (draws must
            # stay pairwise distinct) and clip the end instead
            start = int(rng.integers(ext0, ext1))
        return Period(from_us(start), from_us(min(start + dur, ext1)))
    if kind.base == "region_name":
        names = stats.feature_names.get(kind.region_kind or "", ())
        if not names:
            raise ParamGenError(
                f"dataset has no features of kind {kind.region_kind!r}")
        return names[int(rng.integers(len(names)))]
    if kind.base == "point_sample":
        lon0, lat0, lon1, lat1 = stats.bbox
        return GeoPoint(float(rng.uniform(lon0, lon1)), float(rng.uniform(lat0, lat1)))
    if kind.base == "radius":
        return float(rng.uniform(*RADIUS_RANGE_M))
    if kind.base == "hour_of_day":
        return int(rng.integers(0, 24))
    if kind.base == "min_regions":
        return DEFAULT_MIN_REGIONS
    if kind.base == "harbor_pair":
        names = stats.feature_names.get("harbor", ())
        if len(names) < 2:
            raise ParamGenError("harbor_pair needs at least two harbor features")
        i, j = rng.choice(len(names), 2, replace=False)
        return (names[int(i)], names[int(j)])
    raise ParamGenError(f"cannot generate values for kind {kind}")


def generate_param_sets(template: QueryTemplate, stats: DatasetStats,
                        n: int, seed: int) -> list[ParamSet]:
    """n pairwise-distinct parameter sets, deterministic in (template, stats, n, seed)."""
    if n < 1:
        raise ParamGenError("n must be >= 1")
    rng = np.random.default_rng([seed, zlib.crc32(template.name.encode())])
    out: list[ParamSet] = []
    seen: set[tuple] = set()
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > MAX_DISTINCT_ATTEMPTS + n:
            raise ParamGenError(
                f"template {template.name!r}: could not draw {n} distinct "
                f"parameter sets in {attempts} attempts")
        values = {d.name: _draw_value(d.kind, stats, rng) for d in template.parameters}
        ps = ParamSet(id=len(out), values=values)
        k = ps.key()
        if k in seen:
            continue
        seen.add(k)
        out.append(ps)
    return out


# ---------------------------------------------------------------------------
# rendering


def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def encode_value(v: ParamValue, period_style: str = "between") -> str:
    if isinstance(v, Period):
        a, b = iso_utc(v.start), iso_utc(v.end)
        if period_style == "between":
            return f"{_quote(a)} AND {_quote(b)}"
        if period_style == "between_us_exclusive":
            # SQL BETWEEN is closed-closed; shaving one microsecond off the end
            # restores the closed-open period contract exactly
            b_excl = iso_utc(from_us(v.end_us - 1))
            return f"{_quote(a)} AND {_quote(b_excl)}"
        if period_style == "range":
            return _quote(f"[{a}, {b})")
        raise TemplateError(f"unknown period encoding style {period_style!r}")
    if isinstance(v, GeoPoint):
        return _quote(f"POINT({v.lon!r} {v.lat!r})")
    if isinstance(v, tuple):
        return ", ".join(_quote(str(x)) for x in v)
    if isinstance(v, bool):
        raise TemplateError("boolean parameters are not supported")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return _quote(v)
    raise TemplateError(f"cannot encode parameter value of type {type(v).__name__}")


def render_query(template: QueryTemplate, dialect: str, ps: ParamSet,
                 period_style: str = "between") -> str:
    """Substitute every placeholder with its dialect-specific literal."""
    try:
        text = template.dialect_texts[dialect]
    except KeyError:
        raise TemplateError(
            f"template {template.name!r} has no text for dialect {dialect!r}")

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in ps.values:
            raise TemplateError(
                f"template {template.name!r}: no value for parameter {name!r}")
        return encode_value(ps.values[name], period_style)

    return _PLACEHOLDER_RE.sub(sub, text)
