"""Validation reports shared by the checking operations.

Every diagnostic operation returns a ``ValidationReport``: a list of named
checks with pass/fail status and a detail string for failures, plus the
probe sets / seeds that were used, so reports are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def to_dict(self):
        d = {"name": self.name, "ok": self.ok}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class ValidationReport:
    subject: str
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, name: str, ok: bool, detail: str = ""):
        self.checks.append(Check(name, bool(ok), detail))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def violations(self):
        return [c for c in self.checks if not c.ok]

    def to_dict(self):
        return {
            "subject": self.subject,
            "ok": self.ok,
            "checks": [c.to_dict() for c in self.checks],
            "meta": self.meta,
        }

    def raise_if_failed(self):
        if not self.ok:
            raise AssertionError(
                f"{self.subject}: " + "; ".join(f"{c.name}: {c.detail}" for c in self.violations)
            )
