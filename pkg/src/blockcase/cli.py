"""Command-line front end.

Exit codes separate findings from tool faults so CI gates can tell an
assurance regression apart from a broken invocation: 0 success, 1 findings
(violations, uncovered risks, feared events), 2 usage or parse errors,
3 I/O errors. Every command is deterministic given its inputs and flags.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, eov_sim, policy_analysis
from .cae_dsl import link_evidence, parse, serialize, to_dot, verify_links
from .cae_model import check_well_formed, node_status
from .linefmt import ParseFailure
from .risk_ledger import coverage_check, parse_registry

OK = 0
FINDINGS = 1
PARSE_ERROR = 2
IO_ERROR = 3


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _print_parse_failure(path: str, failure: ParseFailure) -> int:
    for error in failure.errors:
        print(f"{path}:{error}", file=sys.stderr)
    return PARSE_ERROR


def cmd_cae_check(args) -> int:
    try:
        tree = parse(_read_text(args.file))
    except ParseFailure as failure:
        return _print_parse_failure(args.file, failure)
    violations = check_well_formed(tree)
    for violation in violations:
        print(f"{violation.node_id}: {violation.rule}: {violation.message}")
    status = node_status(tree, tree.root).name.capitalize() if not violations else "n/a"
    print(f"{args.file}: {len(violations)} violation(s); root status: {status}")
    return FINDINGS if violations else OK


def cmd_cae_render(args) -> int:
    try:
        tree = parse(_read_text(args.file))
    except ParseFailure as failure:
        return _print_parse_failure(args.file, failure)
    Path(args.out).write_text(to_dot(tree), encoding="utf-8")
    print(f"wrote {args.out}")
    return OK


def cmd_cae_status(args) -> int:
    try:
        tree = parse(_read_text(args.file))
    except ParseFailure as failure:
        return _print_parse_failure(args.file, failure)
    from .cae_model import assumptions_of

    print(f"root {tree.root}: {node_status(tree, tree.root).name.capitalize()}")
    assumptions = assumptions_of(tree, tree.root)
    if assumptions:
        print("assumptions:")
        for nid in assumptions:
            print(f"  {nid}: {tree.nodes[nid].text}")
    else:
        print("assumptions: none")
    return OK


def cmd_risk_coverage(args) -> int:
    try:
        registry = parse_registry(_read_text(args.registry))
    except ParseFailure as failure:
        return _print_parse_failure(args.registry, failure)
    try:
        tree = parse(_read_text(args.cae))
    except ParseFailure as failure:
        return _print_parse_failure(args.cae, failure)

    report = coverage_check(registry, tree)
    for entry in report.entries:
        if entry.missing:
            print(f"{entry.risk_id}: {entry.bucket} (missing: {', '.join(entry.missing)})")
        else:
            print(f"{entry.risk_id}: {entry.bucket}")

    cited = {m.evidence_id for risk in registry for m in risk.mitigations}
    issues = verify_links(tree, Path(args.cae).parent, only=cited)
    for issue in issues:
        print(f"{issue.node_id}: {issue.code}: {issue.detail}")

    counts = ", ".join(f"{bucket}: {count}" for bucket, count in sorted(report.counts.items()))
    print(f"risks: {len(registry)} ({counts}); link issues: {len(issues)}")
    return OK if report.clean and not issues else FINDINGS


def cmd_sim_run(args) -> int:
    try:
        config = eov_sim.parse_scenario(_read_text(args.scenario))
        if args.seed is not None:
            from dataclasses import replace

            config = replace(config, seed=args.seed)
            eov_sim.validate_config(config)
    except eov_sim.ConfigInvalid as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return PARSE_ERROR

    report = eov_sim.run_scenario(config)
    payload = report.to_json_bytes()
    if args.out:
        Path(args.out).write_bytes(payload)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(payload.decode("utf-8"))
    for event, count in sorted(report.feared_event_counts.items(), key=lambda kv: kv[0].value):
        print(f"{event.value}: {count}")
    if report.liveness_lost_at is not None:
        print(f"liveness lost at step {report.liveness_lost_at}")
    return OK if report.clean else FINDINGS


def _format_sets(sets) -> str:
    return ", ".join("{" + ",".join(sorted(s)) + "}" for s in sets)


def cmd_policy_tolerance(args) -> int:
    try:
        policy = policy_analysis.parse_policy(_read_text(args.policy))
        satisfying = policy_analysis.min_satisfying_sets(policy)
        blocking = policy_analysis.min_blocking_sets(policy)
    except policy_analysis.TooManyIdentitiesError as exc:
        print(str(exc), file=sys.stderr)
        return PARSE_ERROR
    except policy_analysis.PolicyError as exc:
        print(f"{args.policy}: {exc}", file=sys.stderr)
        return PARSE_ERROR
    print(f"policy: {policy_analysis.serialize_policy(policy)}")
    print(f"identities: {', '.join(sorted(policy_analysis.identities(policy)))}")
    print(f"fraud tolerance: {min(len(s) for s in satisfying) - 1}")
    print(f"censorship tolerance: {min(len(s) for s in blocking) - 1}")
    print(f"minimal satisfying sets: {_format_sets(satisfying)}")
    print(f"minimal blocking sets: {_format_sets(blocking)}")
    return OK


def _parse_prob_flags(pairs: list[str]) -> dict[str, float]:
    probs: dict[str, float] = {}
    for pair in pairs:
        mode, _, value = pair.partition("=")
        if not value:
            raise policy_analysis.BadProbabilityError(f"--prob takes mode=value, got {pair!r}")
        probs[mode] = float(value)
    return probs


def default_campaign_scenario(policy, *, seed: int = 0) -> "eov_sim.ScenarioConfig":
    """A small standalone base: one valid write and one guard-violating transfer."""
    valid = eov_sim.TxProposal("demo-valid", "client-1", 1, eov_sim.ChaincodeOp.set("asset", 1))
    invalid = eov_sim.TxProposal(
        "demo-invalid", "client-1", 2, eov_sim.ChaincodeOp.transfer("unfunded", "sink", 5, valid=False)
    )
    return eov_sim.ScenarioConfig(
        msp_emitters=frozenset({"client-1"}),
        msp_endorsers=frozenset(policy_analysis.identities(policy)),
        endorser_behaviors={},
        policy=policy,
        orderers=eov_sim.OrdererConfig(n=3, batch_size=8),
        peers=1,
        workload=((0, valid), (0, invalid)),
        horizon=2,
        seed=seed,
    )


def cmd_policy_campaign(args) -> int:
    try:
        policy = policy_analysis.parse_policy(_read_text(args.policy))
    except policy_analysis.PolicyError as exc:
        print(f"{args.policy}: {exc}", file=sys.stderr)
        return PARSE_ERROR

    try:
        if args.scenario:
            base = eov_sim.parse_scenario(_read_text(args.scenario))
            from dataclasses import replace

            base = replace(base, policy=policy)
            eov_sim.validate_config(base)
        else:
            base = default_campaign_scenario(policy, seed=args.seed)
        probs = _parse_prob_flags(args.prob)
        report = policy_analysis.monte_carlo_campaign(base, probs, args.runs, args.seed)
    except (eov_sim.ConfigInvalid, policy_analysis.BadProbabilityError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return PARSE_ERROR

    _, digest = policy_analysis.emit_evidence_report(report, args.out)
    print(f"wrote {args.out} (sha256 {digest})")
    print(f"fraud: {report.fraud_successes}/{report.n_runs} rate {report.fraud_success_rate:.4f} "
          f"ci95 +/-{report.fraud_ci95_halfwidth:.4f}")
    print(f"censorship: {report.censorship_successes}/{report.n_runs} rate {report.censorship_success_rate:.4f} "
          f"ci95 +/-{report.censorship_ci95_halfwidth:.4f}")

    if args.link:
        cae_path_text, _, evidence_id = args.link.rpartition(":")
        if not cae_path_text or not evidence_id:
            print(f"--link takes <cae-file>:<evidence-id>, got {args.link!r}", file=sys.stderr)
            return PARSE_ERROR
        cae_path = Path(cae_path_text)
        try:
            tree = parse(cae_path.read_text(encoding="utf-8"))
        except ParseFailure as failure:
            return _print_parse_failure(cae_path_text, failure)
        try:
            reference = str(Path(args.out).resolve().relative_to(cae_path.parent.resolve()))
        except ValueError:
            reference = str(Path(args.out).resolve())
        tree = link_evidence(tree, evidence_id, reference, digest)
        cae_path.write_text(serialize(tree), encoding="utf-8")
        print(f"linked {evidence_id} in {cae_path}")

    return OK if report.fraud_successes == 0 and report.censorship_successes == 0 else FINDINGS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockcase", description=__doc__)
    parser.add_argument("--version", action="version", version=f"blockcase {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)

    cae = groups.add_parser("cae", help="check, render and evaluate assurance trees")
    cae_sub = cae.add_subparsers(dest="command", required=True)
    check = cae_sub.add_parser("check", help="well-formedness findings and root status")
    check.add_argument("file")
    check.set_defaults(func=cmd_cae_check)
    render = cae_sub.add_parser("render", help="deterministic DOT rendering")
    render.add_argument("file")
    render.add_argument("--out", required=True, help="output path")
    render.add_argument("--format", choices=("dot",), default="dot")
    render.set_defaults(func=cmd_cae_render)
    status = cae_sub.add_parser("status", help="root status and open assumptions")
    status.add_argument("file")
    status.set_defaults(func=cmd_cae_status)

    risk = groups.add_parser("risk", help="risk registry checks")
    risk_sub = risk.add_subparsers(dest="command", required=True)
    coverage = risk_sub.add_parser("coverage", help="tie every risk to evidence or acceptance")
    coverage.add_argument("registry")
    coverage.add_argument("cae")
    coverage.set_defaults(func=cmd_risk_coverage)

    sim = groups.add_parser("sim", help="pipeline simulation")
    sim_sub = sim.add_subparsers(dest="command", required=True)
    run = sim_sub.add_parser("run", help="run one scenario and write its report")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default=None, help="report path (stdout when omitted)")
    run.set_defaults(func=cmd_sim_run)

    policy = groups.add_parser("policy", help="endorsement-policy analysis")
    policy_sub = policy.add_subparsers(dest="command", required=True)
    tolerance = policy_sub.add_parser("tolerance", help="exact fraud/censorship tolerances")
    tolerance.add_argument("policy")
    tolerance.set_defaults(func=cmd_policy_tolerance)
    campaign = policy_sub.add_parser("campaign", help="sampled fault campaign with an evidence report")
    campaign.add_argument("policy")
    campaign.add_argument("--runs", type=int, default=1000, help="number of sampled runs")
    campaign.add_argument("--seed", type=int, default=0, help="campaign seed")
    campaign.add_argument("--scenario", default=None, help="base scenario file (a default is built otherwise)")
    campaign.add_argument("--prob", action="append", default=[], metavar="MODE=P",
                          help="fault probability, e.g. fraudulent=0.3 (repeatable)")
    campaign.add_argument("--out", required=True, help="evidence report path")
    campaign.add_argument("--link", default=None, metavar="CAE:EVIDENCE_ID",
                          help="link the written report into an assurance tree")
    campaign.set_defaults(func=cmd_policy_campaign)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename}", file=sys.stderr)
        return IO_ERROR
    except (OSError, policy_analysis.IoFailure) as exc:
        print(str(exc), file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
