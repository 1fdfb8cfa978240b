"""Serialization of CLOS sets in the Linux resctrl schemata text format.

The same writer drives either a mock directory tree (tests, dry runs) or a
real control filesystem; only the mock gets write-then-rename atomicity,
since resctrl files cannot be renamed onto.

Grammar (bit-exact):
    line        := resource ":" assignments "\n"
    resource    := "L3" | "MB"
    assignments := assign ("," assign)*
    assign      := cache_id "=" value
    value       := lowercase hex mask (L3) | decimal integer 1..100 (MB)
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from coco.closconfig import ClosConfig, ClosSet
from coco.errors import ApplyDriftError, SchemataParseError, ValidationError

DEFAULT_RESCTRL_ROOT = "/sys/fs/resctrl"
GROUP_FILES = ("schemata", "tasks", "cpus")
_HEX_DIGITS = set("0123456789abcdef")


@dataclass(frozen=True)
class SchemataFragment:
    """Parsed schemata content: per-cache-id masks and MBA percentages."""

    l3_masks: dict[int, int]
    mb_percents: dict[int, int]

    def mask(self, cache_id: int = 0) -> int:
        return self.l3_masks[cache_id]

    def mba_percent(self, cache_id: int = 0) -> int:
        return self.mb_percents[cache_id]


@dataclass(frozen=True)
class ResctrlLayout:
    """Group-per-CLOS directory layout under a configurable root."""

    root_path: Path
    real_fs: bool = False
    cache_id: int = 0

    @classmethod
    def from_env(cls, root: str | None = None, real_fs: bool = False) -> "ResctrlLayout":
        path = root or os.environ.get("RESCTRL_ROOT", DEFAULT_RESCTRL_ROOT)
        return cls(Path(path), real_fs=real_fs)

    def group_dir(self, clos_id: int) -> Path:
        return self.root_path / f"clos{clos_id}"


@dataclass
class GroupReport:
    group: str
    action: str  # created | updated | unchanged | failed
    error: str | None = None


@dataclass
class ApplyReport:
    groups: list[GroupReport] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(g.action != "failed" for g in self.groups)

    @property
    def rewrites(self) -> int:
        return sum(g.action in ("created", "updated") for g in self.groups)


def serialize_schemata(config: ClosConfig, cache_id: int = 0) -> str:
    """Two newline-terminated lines: the L3 mask, then the MB percentage."""
    if config.mask <= 0:
        raise ValidationError(f"zero mask: clos {config.id}")
    if not config.is_contiguous():
        raise ValidationError(f"non-contiguous mask: clos {config.id}")
    if not 1 <= config.mba_percent <= 100:
        raise ValidationError(f"mba out of range: clos {config.id}")
    if cache_id < 0:
        raise ValidationError("cache_id must be >= 0")
    return f"L3:{cache_id}={config.mask:x}\nMB:{cache_id}={config.mba_percent}\n"


def parse_schemata(text: str) -> SchemataFragment:
    """Inverse of serialize for well-formed input; whitespace-tolerant."""
    l3: dict[int, int] = {}
    mb: dict[int, int] = {}
    lines = text.splitlines()
    for ln, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        col0 = raw.find(stripped[0]) + 1
        head, sep, rest = stripped.partition(":")
        if not sep:
            raise SchemataParseError("expected ':' after resource name", ln, col0)
        resource = head.strip()
        if resource not in ("L3", "MB"):
            raise SchemataParseError(f"unsupported resource {resource}", ln, col0)
        target = l3 if resource == "L3" else mb
        cursor = raw.find(":") + 1
        for part in rest.split(","):
            token = part.strip()
            col = cursor + (part.find(token) if token else 0) + 1
            cursor += len(part) + 1
            cid_text, eq, value = token.partition("=")
            if not eq or not cid_text.strip() or not value.strip():
                raise SchemataParseError("expected <cache_id>=<value>", ln, col)
            try:
                cid = int(cid_text.strip())
            except ValueError:
                raise SchemataParseError(
                    f"malformed cache id {cid_text.strip()!r}", ln, col) from None
            if cid < 0:
                raise SchemataParseError("cache id must be >= 0", ln, col)
            if cid in target:
                raise SchemataParseError(f"duplicate cache id {cid}", ln, col)
            value = value.strip()
            if resource == "L3":
                if not value or not set(value) <= _HEX_DIGITS:
                    raise SchemataParseError(
                        f"malformed hex mask {value!r}", ln, col)
                mask = int(value, 16)
                if mask == 0:
                    raise SchemataParseError("zero mask", ln, col)
                target[cid] = mask
            else:
                try:
                    percent = int(value)
                except ValueError:
                    raise SchemataParseError(
                        f"malformed percentage {value!r}", ln, col) from None
                if not 1 <= percent <= 100:
                    raise SchemataParseError(
                        f"percent {percent} out of [1, 100]", ln, col)
                target[cid] = percent
    if not l3:
        raise SchemataParseError("missing L3 line", max(len(lines), 1), 1)
    if not mb:
        raise SchemataParseError("missing MB line", max(len(lines), 1), 1)
    return SchemataFragment(l3, mb)


def serialize_clos_set(clos_set: ClosSet, cache_id: int = 0) -> str:
    """All latency-critical groups, id order, '# closN' headers."""
    chunks = []
    for cfg in sorted(clos_set.configs, key=lambda c: c.id):
        if cfg.id == clos_set.reserved_id:
            continue
        chunks.append(f"# clos{cfg.id}\n" + serialize_schemata(cfg, cache_id))
    return "".join(chunks)


def _write_schemata(path: Path, content: str, real_fs: bool) -> None:
    if real_fs:
        path.write_text(content)
        return
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content)
    os.replace(tmp, path)


def apply(clos_set: ClosSet, layout: ResctrlLayout) -> ApplyReport:
    """Create/update one group directory per LC CLOS; verify by read-back.

    Per-group failures are reported, not raised; a read-back mismatch on a
    group that claimed success raises ApplyDriftError.  In mock mode a group
    directory created by this call is removed again if its writes fail.
    """
    report = ApplyReport()
    verify: list[tuple[Path, ClosConfig]] = []
    for cfg in sorted(clos_set.configs, key=lambda c: c.id):
        if cfg.id == clos_set.reserved_id:
            continue
        gdir = layout.group_dir(cfg.id)
        created_here = False
        try:
            desired = serialize_schemata(cfg, layout.cache_id)
            if not gdir.exists():
                gdir.mkdir(parents=True)
                created_here = True
            for name in GROUP_FILES[1:]:
                f = gdir / name
                if not f.exists():
                    f.touch()
            schemata = gdir / "schemata"
            existing = schemata.read_text() if schemata.exists() else None
            if existing == desired:
                report.groups.append(GroupReport(gdir.name, "unchanged"))
            else:
                _write_schemata(schemata, desired, layout.real_fs)
                action = "created" if created_here else "updated"
                report.groups.append(GroupReport(gdir.name, action))
            verify.append((schemata, cfg))
        except OSError as e:
            if created_here and not layout.real_fs:
                shutil.rmtree(gdir, ignore_errors=True)
            report.groups.append(GroupReport(gdir.name, "failed", str(e)))
    for schemata, cfg in verify:
        fragment = parse_schemata(schemata.read_text())
        if (fragment.mask(layout.cache_id) != cfg.mask
                or fragment.mba_percent(layout.cache_id) != cfg.mba_percent):
            raise ApplyDriftError(
                f"apply drift: {schemata} does not match clos {cfg.id}")
    return report


def assign_tasks(layout: ResctrlLayout, clos_id: int, pids: list[int]) -> None:
    """Plain writes of PIDs into a group's tasks file; no liveness checks."""
    tasks = layout.group_dir(clos_id) / "tasks"
    with tasks.open("a") as f:
        for pid in pids:
            f.write(f"{pid}\n")
