"""Thin Python front end over the C++ core.

Each command mirrors the CLI subcommand of the same name and returns
``(exit_code, report)`` where ``report`` is the parsed JSON report.
"""

from ._core import ringdown, run, spearman

__all__ = ["run", "ringdown", "spearman", "pf", "modal", "design", "simulate", "sweep", "scan_n1", "export_sdpa"]


def _cmd(name):
    def call(case, **options):
        res = run(name, {"case": str(case), **options})
        return res["exit_code"], res["report"]

    call.__name__ = name.replace("-", "_")
    return call


pf = _cmd("pf")
modal = _cmd("modal")
design = _cmd("design")
simulate = _cmd("simulate")
sweep = _cmd("sweep")
scan_n1 = _cmd("scan-n1")
export_sdpa = _cmd("export-sdpa")
