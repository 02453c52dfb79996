"""Flat ``key = value`` scenario files.

Blank lines and ``#`` comments are ignored. Every key must be known;
errors carry the offending line number.
"""
from __future__ import annotations

from pathlib import Path
import re

from .experiments import Scenario

KEYS = {
    "name": str,
    "n": int, "R": float, "c_omega": float, "alpha1": float, "gamma": float, "nu0": float,
    "x0": float, "length": float, "n_cells": int, "cfl": float,
    "horizon": float, "record_stride": int,
    "z0": str, "z1": str, "policy": str,
    "eps": float, "lambda1": float, "lambda2": float,
}

ORDER = list(KEYS)


class ConfigError(ValueError):
    pass


def _convert(key, raw, lineno):
    typ = KEYS[key]
    if typ is str:
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
            raw = raw[1:-1]
        return raw
    try:
        if typ is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {typ.__name__}, got {raw!r}") from None


def parse(text: str, source: str = "<config>") -> dict:
    out = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        key, sep, raw = s.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        if key not in KEYS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r} "
                              f"(first set on line {lines[key]})")
        try:
            out[key] = _convert(key, raw, lineno)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        lines[key] = lineno
    out["__lines__"] = lines
    return out


def scenario_from_text(text: str, source: str = "<config>") -> Scenario:
    d = parse(text, source)
    lines = d.pop("__lines__")
    try:
        return Scenario.from_flat(d)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        hit = [f"line {ln} ({k})" for k, ln in lines.items() if re.search(rf"\b{re.escape(k)}\b", msg)]
        where = f" [{', '.join(hit)}]" if hit else ""
        raise ConfigError(f"{source}: invalid scenario{where}: {msg}") from None


def load(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return scenario_from_text(text, str(p))


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def dumps(scenario: Scenario) -> str:
    flat = scenario.to_flat()
    lines = ["# etwave scenario"]
    for k in ORDER:
        if k in flat:
            lines.append(f"{k} = {_fmt(flat[k])}")
    return "\n".join(lines) + "\n"
