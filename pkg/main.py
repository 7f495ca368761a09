"""
Hilbert 트레이스 툴킷 - CLI 진입점
build / verify / cohomology / refine / regular 하위 명령
"""

import argparse
import os
import sys
import warnings
from typing import List, Optional

# src 디렉토리를 path에 추가
sys.path.insert(0, os.path.dirname(__file__))

from src.core.config import Tolerances, load_tolerances
from src.core.errors import (
    ChecksumError,
    ConfigurationError,
    MeshError,
    RankInstabilityWarning,
    SchemaError,
    StructureError,
    TraceToolkitError,
)
from src.core.checks import expect, info
from src.core.instance_io import file_checksum, load, load_regular, save, save_regular
from src.fem.derham import build_complex_pair, boundary_complex, smith_betti
from src.fem.feec import build_feec
from src.fem.mesh import DOMAINS, build_mesh, load_mesh
from src.regular.decomposition import full_regular_bases
from src.traces.surface_ops import build_all
from src.traces.trace_complex import (
    assemble_trace_complex,
    bc_complex,
    cohomology_dims,
    domain_complex,
)
from src.traces.trace_system import assemble_trace
from src.verify.battery import mesh_for, run_battery
from src.verify.refine import PROBES, check_refinement, parse_n_list, refine_study, write_table
from src.verify.report import Report, instance_summary, write_report

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

USAGE_ERRORS = (SchemaError, ChecksumError, StructureError, ConfigurationError, MeshError, OSError)


class TraceToolkitCLI:
    """하위 명령 실행기"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.quiet = bool(getattr(args, "quiet", False))
        self.tol = self._tolerances()

    def _tolerances(self) -> Tolerances:
        a = self.args
        base = load_tolerances(getattr(a, "config", None))
        return base.with_overrides(
            rank_factor=getattr(a, "rank_factor", None),
            residual=getattr(a, "tol", None),
            seed=getattr(a, "seed", None),
            samples=getattr(a, "samples", None),
        )

    def status(self, tag: str, message: str):
        if not self.quiet:
            print(f"[{tag}] {message}", file=sys.stderr, flush=True)

    def _report(self, command: str, pair, path: Optional[str]) -> Report:
        checksum = file_checksum(path) if path else None
        return Report(command=command,
                      instance=instance_summary(pair.label, checksum, pair.meta),
                      config=self.tol.to_dict())

    # ─── Commands ───────────────────────────────────────────────────────────

    def build(self) -> int:
        a = self.args
        if a.mesh:
            mesh = load_mesh(a.mesh)
            self.status("build", f"mesh {a.mesh}: {mesh.counts}")
        else:
            mesh = build_mesh(a.domain, a.n)
            self.status("build", f"{a.domain} n={a.n}: {mesh.counts}")
        pair = build_complex_pair(build_feec(mesh))
        checksum = save(pair, a.out)
        self.status("build", f"wrote {a.out} ({checksum[:12]})")
        print(f"built {pair.label} -> {a.out}")
        return EXIT_PASS

    def verify(self) -> int:
        a = self.args
        pair = load(a.input)
        regular = load_regular(a.regular) if a.regular else None
        self.status("verify", f"{pair.label}: levels {pair.indices()}, seed {self.tol.seed}, "
                              f"samples {self.tol.samples}")
        result = run_battery(pair, self.tol, regular=regular,
                             on_block=lambda name: self.status("verify", f"running {name}"))
        report = self._report("verify", pair, a.input)
        report.records = result.records
        report.cohomology = result.cohomology
        report.timings = result.timings
        write_report(report, a.report)
        for record in report.failed():
            self.status("verify", f"FAIL {record.name} (level {record.level}): "
                                  f"value {record.value} > {record.tolerance}")
        self.status("verify", f"report written to {a.report}")
        print(report.summary_line())
        return EXIT_PASS if report.verdict == "PASS" else EXIT_FAIL

    def cohomology(self) -> int:
        a = self.args
        pair = load(a.input)
        traces = {k: assemble_trace(pair, k, self.tol) for k in pair.indices()}
        if a.which == "domain":
            complex_ = domain_complex(pair, self.tol)
        elif a.which == "bc":
            complex_ = bc_complex(pair, traces, self.tol)
        else:
            complex_, _ = assemble_trace_complex(pair, traces, build_all(pair, traces, self.tol))
        coh = cohomology_dims(complex_, self.tol)
        self.status("cohomology", f"{a.which}: dims {complex_.dims}, degrees {list(complex_.degrees)}")

        records = [
            expect("cohomology.agree", coh.agree, None, "trace-complex", rank=coh.by_rank, hodge=coh.by_hodge),
            info(f"cohomology.{a.which}", None, None, "trace-complex", dims=coh.dims,
                 smallest_eigenvalues=coh.smallest_eigenvalues, unstable=coh.unstable),
        ]
        mesh = mesh_for(pair)
        if a.which == "trace" and mesh is not None:
            betti = smith_betti(boundary_complex(mesh))
            records.append(expect("cohomology.smith", list(betti.betti) == coh.dims, None, "trace-complex",
                                  smith=list(betti.betti), trace=coh.dims))
        report = self._report("cohomology", pair, a.input)
        report.records = records
        report.cohomology = {a.which: coh.dims}
        if a.report:
            write_report(report, a.report)
            self.status("cohomology", f"report written to {a.report}")
        print(f"{a.which} cohomology {tuple(coh.dims)} {report.verdict}")
        return EXIT_PASS if report.verdict == "PASS" else EXIT_FAIL

    def refine(self) -> int:
        a = self.args
        n_list = parse_n_list(a.n_list)
        self.status("refine", f"{a.domain} n={n_list} probe={a.probe} level={a.level}")
        frame = refine_study(n_list, a.probe, level=a.level, domain=a.domain, tol=self.tol,
                             progress=not self.quiet)
        write_table(frame, a.report)
        records = check_refinement(frame, self.tol)
        failed = [r for r in records if not r.passed]
        for record in failed:
            self.status("refine", f"FAIL {record.name}: {record.detail}")
        self.status("refine", f"table written to {a.report}")
        verdict = "FAIL" if failed else "PASS"
        print(f"refine {a.probe} k={a.level} ratios {frame['ratio'].round(6).tolist()} {verdict}")
        return EXIT_FAIL if failed else EXIT_PASS

    def regular(self) -> int:
        a = self.args
        pair = load(a.input)
        bases = full_regular_bases(pair, self.tol)
        checksum = save_regular(bases, a.out, label=pair.label)
        self.status("regular", f"{len(bases)} regular blocks written to {a.out} ({checksum[:12]})")
        print(f"regular {pair.label} -> {a.out}")
        return EXIT_PASS

    def run(self) -> int:
        handler = getattr(self, self.args.command)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RankInstabilityWarning)
            code = handler()
        for w in caught:
            if issubclass(w.category, RankInstabilityWarning):
                self.status("warn", str(w.message))
        return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Hilbert complex trace toolkit")
    parser.add_argument("--quiet", action="store_true", help="suppress status lines on stderr")
    parser.add_argument("--rank-factor", type=float, default=None, help="rank threshold factor")
    parser.add_argument("--config", default=None, help="tolerance JSON file (default data/tolerances.json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a de Rham instance file")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--domain", choices=DOMAINS)
    source.add_argument("--mesh", help="tet-mesh/v1 JSON file")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="run the full verification battery")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--regular", default=None, help="regular subspace block file")
    p.add_argument("--report", required=True)
    p.add_argument("--tol", type=float, default=None, help="residual tolerance")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("cohomology", help="cohomology dimensions of a complex")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--which", choices=("domain", "bc", "trace"), required=True)
    p.add_argument("--report", default=None)

    p = sub.add_parser("refine", help="refinement study of isometry defects")
    p.add_argument("--domain", choices=DOMAINS, default="cube")
    p.add_argument("--n-list", required=True, help="comma separated subdivisions, e.g. 1,2,3")
    p.add_argument("--probe", choices=PROBES, required=True)
    p.add_argument("--level", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--report", required=True, help="CSV output path")

    p = sub.add_parser("regular", help="write full-space regular subspace blocks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """메인 함수"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "build" and args.domain and args.n < 1:
        parser.error(f"--n must be ≥ 1, got {args.n}")
    try:
        return TraceToolkitCLI(args).run()
    except USAGE_ERRORS as e:
        print(f"[error] {type(e).__name__}: {e}", file=sys.stderr, flush=True)
        return EXIT_USAGE
    except TraceToolkitError as e:
        print(f"[error] {type(e).__name__}: {e}", file=sys.stderr, flush=True)
        return EXIT_FAIL
    except KeyboardInterrupt:
        print("\n[error] interrupted", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
