"""Command-line driver: ``mcsterm analyze|rank|transform|selfcheck``."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .core import InvariantViolation, Mcs, UsageError
from .ranking import check_ranking, synthesize_ranking
from .termination import ALGORITHMS, decide
from .textio import ParseError, emit_report, format_mcs, parse_mcs
from .transform import fully_elaborate, restrict_reachable, stabilize, to_original_indices

EXIT_TERMINATING = 0
EXIT_NONTERMINATING = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _load(path: str) -> Mcs:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_mcs(text).system
    except ParseError as exc:
        raise click.UsageError(f"{path}:{exc}") from None


def _out(data: bytes) -> None:
    sys.stdout.buffer.write(data)
    sys.stdout.flush()


def _root(system: Mcs, root: str | None) -> str | None:
    root = root if root is not None else system.root
    if root is not None and root not in system.points:
        raise click.UsageError(f"unknown root {root!r}")
    return root


@click.group()
def cli() -> None:
    """Termination analysis of monotonicity constraint systems over the integers."""


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--algorithm", type=click.Choice(ALGORITHMS), default="stable-closure", show_default=True)
@click.option("--root", default=None, help="Analyse runs starting at this point (overrides the file).")
@click.option("--witness", type=click.IntRange(min=1), default=None, help="Prefix length of a non-terminating run.")
@click.option("--json", "as_json", is_flag=True, help="Emit the JSON report.")
def analyze(file, algorithm, root, witness, as_json):
    """Decide termination of FILE."""
    system = _load(file)
    verdict = decide(system, algorithm, _root(system, root), witness)
    _out(emit_report(verdict, fmt="json" if as_json else "text"))
    sys.exit(EXIT_TERMINATING if verdict.terminating else EXIT_NONTERMINATING)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--root", default=None, help="Rank runs starting at this point (overrides the file).")
@click.option("--json", "as_json", is_flag=True, help="Emit the JSON report.")
def rank(file, root, as_json):
    """Construct and check a lexicographic ranking function for FILE."""
    system = _load(file)
    root = _root(system, root)
    rho = synthesize_ranking(system, root)
    if rho is not None and not check_ranking(system, rho):
        raise InvariantViolation("constructed ranking function failed its check")
    _out(
        emit_report(
            None,
            rho,
            fmt="json" if as_json else "text",
            names=system.names,
            algorithm="difference-ranking",
            rooted=root,
            terminating=rho is not None,
        )
    )
    sys.exit(EXIT_TERMINATING if rho is not None else EXIT_NONTERMINATING)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--stabilize", "mode", flag_value="stabilize", help="Split points until the system is stable.")
@click.option("--elaborate", "mode", flag_value="elaborate", help="Split points by every variable ordering.")
@click.option("--root", default=None, help="Keep only points reachable from copies of this point.")
def transform(file, mode, root):
    """Print FILE transformed, in the input format."""
    if mode is None:
        raise click.UsageError("choose --stabilize or --elaborate")
    system = _load(file)
    root = _root(system, root)
    if mode == "stabilize":
        out, mapping = stabilize(system)
        if root is not None:
            out = restrict_reachable(out, mapping.copies(root))
    else:
        out, mapping = fully_elaborate(system, root=root)
        out = to_original_indices(out, mapping)
    _out(format_mcs(out).encode())


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=click.IntRange(min=0), default=200, show_default=True)
@click.option("--witness-length", type=click.IntRange(min=1), default=100, show_default=True)
def selfcheck(seed, count, witness_length):
    """Cross-validate all decision procedures on a random corpus."""
    from .oracle import CorpusSpec, concrete_prefix_check, random_corpus, sct_difference_oracle
    from .termination import find_witness

    failures = 0
    stats = {True: 0, False: 0}
    for k, system in enumerate(random_corpus(CorpusSpec(seed=seed, count=count))):
        verdicts = {a: decide(system, a).terminating for a in ALGORITHMS}
        verdicts["sct-difference"] = sct_difference_oracle(system).terminating
        problems = []
        if len(set(verdicts.values())) != 1:
            problems.append(f"verdicts disagree: {verdicts}")
        term = verdicts["stable-closure"]
        stats[term] += 1
        rho = synthesize_ranking(system)
        if term:
            if rho is None:
                problems.append("no ranking function for a terminating system")
            elif not check_ranking(system, rho):
                problems.append("ranking function fails its check")
        else:
            if rho is not None:
                problems.append("ranking function for a non-terminating system")
            w = find_witness(system, witness_length)
            if not concrete_prefix_check(w.run, system, w.prefix):
                problems.append("witness prefix violates the system")
        for msg in problems:
            failures += 1
            click.echo(f"system {k}: {msg}")
    click.echo(f"checked {count} systems: {stats[True]} terminating, {stats[False]} non-terminating, {failures} problems")
    sys.exit(0 if failures == 0 else 1)


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    try:
        cli.main(args=argv, prog_name="mcsterm", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except UsageError as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_USAGE
    except InvariantViolation as exc:
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
