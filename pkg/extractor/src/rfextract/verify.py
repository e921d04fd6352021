"""Post-hoc validation of an extraction output directory.

Re-parses every *.rfemb with the independent reader (magic, structure,
CRC32, finiteness, duplicate ids) and checks that all layers cover the
same problem ids.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .rfemb import StoreFormatError, read_store


@dataclass
class FileReport:
    name: str
    ok: bool
    message: str


@dataclass
class VerifyReport:
    files: list[FileReport] = field(default_factory=list)
    cross_layer_errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.files) and not self.cross_layer_errors

    def lines(self) -> list[str]:
        out = [
            f"{'ok ' if f.ok else 'BAD'} {f.name}: {f.message}" for f in self.files
        ]
        out.extend(f"BAD cross-layer: {msg}" for msg in self.cross_layer_errors)
        out.append("ok" if self.ok else "violations found")
        return out


def verify(out_dir) -> VerifyReport:
    report = VerifyReport()
    names = sorted(n for n in os.listdir(out_dir) if n.endswith(".rfemb"))
    if not names:
        report.cross_layer_errors.append(f"no *.rfemb files in {out_dir}")
        return report
    id_sets: dict[str, tuple[frozenset, int]] = {}
    embedders = set()
    for name in names:
        path = os.path.join(out_dir, name)
        try:
            store = read_store(path)
        except StoreFormatError as exc:
            report.files.append(FileReport(name, False, str(exc)))
            continue
        report.files.append(
            FileReport(
                name, True,
                f"{len(store.vectors)} records, dim {store.dim}, "
                f"layer {store.layer_index}, CRC valid",
            )
        )
        id_sets[name] = (frozenset(store.vectors), store.layer_index)
        embedders.add(store.embedder_id)

    if len(embedders) > 1:
        report.cross_layer_errors.append(f"mixed embedder ids: {sorted(embedders)}")
    if len(id_sets) > 1:
        reference_name = next(iter(id_sets))
        reference = id_sets[reference_name][0]
        for name, (ids, _) in id_sets.items():
            if ids != reference:
                report.cross_layer_errors.append(
                    f"{name} id set differs from {reference_name} "
                    f"({len(ids ^ reference)} ids not shared)"
                )
        layers = [layer for _, layer in id_sets.values()]
        if len(set(layers)) != len(layers):
            report.cross_layer_errors.append(f"duplicate layer indices: {sorted(layers)}")
    return report
