"""The `evabs` command: provisioning, sessions, attack runs, invoices.

Subcommands:
    init       create a registry file (group key, tariff)
    register   enroll a vehicle (prints its credentials exactly once)
    revoke     disable a vehicle server-side
    session    run one honest charge session against a registry file
    attack     run a shipped or user scenario and report the verdict
    invoices   list issued invoices

The registry path comes from --registry or the EVABS_REGISTRY environment
variable. All randomness funnels through --seed, so any run can be
reproduced bit for bit; commands that generate a seed print it.

Exit codes: 0 success (or: every scenario defense held), 1 protocol or
domain failure, 2 usage/configuration error, 3 storage error.

Secrecy rule: generated keys are printed once, here, to the operator; no
transcript, report or log ever contains key material (secure-line frames
are redacted on export).
"""

import argparse
import json
import os
import sys

from evabs import crypto
from evabs._backend import BACKEND
from evabs.errors import (
    ConfigError,
    EvabsError,
    InvalidInput,
    InvalidSeed,
    ScriptError,
    StorageError,
)
from evabs.registry import Registry
from evabs.scenario import (
    SCENARIO_ALIASES,
    ScenarioRunner,
    builtin_scenarios,
    run_named_scenario,
)

_SEED_MAX = (1 << 64) - 1


def _seed_value(text):
    value = int(text, 0)
    if not 0 <= value <= _SEED_MAX:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _hex_bytes(size):
    def convert(text):
        try:
            value = bytes.fromhex(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not hex: {text!r}") from None
        if len(value) != size:
            raise argparse.ArgumentTypeError(f"need {size} bytes ({2 * size} hex chars)")
        return value

    return convert


def _registry_path(args):
    path = args.registry or os.environ.get("EVABS_REGISTRY")
    if not path:
        raise ConfigError("no registry path: pass --registry or set EVABS_REGISTRY")
    return path


def _fresh_seed(args):
    if args.seed is not None:
        return args.seed
    seed = int.from_bytes(os.urandom(8), "big")
    print(f"seed: {seed} (pass --seed {seed} to reproduce)")
    return seed


def _rng(seed):
    return crypto.NonceSource.from_seed(seed)


# -- subcommands ----------------------------------------------------------


def cmd_init(args):
    path = _registry_path(args)
    if os.path.exists(path) and not args.force:
        raise ConfigError(f"{path} exists; use --force to overwrite")
    seed = _fresh_seed(args)
    group_key = _rng(seed).next_bytes(32)
    registry = Registry(group_key=group_key, tariff_per_second=args.tariff)
    registry.save(path)
    print(f"registry: {path}")
    print(f"tariff_per_second: {args.tariff}")
    # shown once so the operator can provision terminals; never logged again
    print(f"group_key: {group_key.hex()}")
    return 0


def cmd_register(args):
    path = _registry_path(args)
    registry = Registry.load(path)
    id_a, k_a = args.vehicle, args.key
    if id_a is None or k_a is None:
        # only draw (and announce) a seed when credentials need generating
        rng = _rng(_fresh_seed(args))
        id_a = id_a if id_a is not None else rng.next_bytes(16)
        k_a = k_a if k_a is not None else rng.next_bytes(32)
    record = registry.register(id_a, k_a, balance=args.balance, owner=args.owner)
    registry.save(path)
    print(f"vehicle: {record.id_a.hex()}")
    print(f"key: {record.k_a.hex()}")
    print(f"lookup_key: {record.lookup_key.hex()}")
    print(f"balance: {record.balance}")
    return 0


def cmd_revoke(args):
    path = _registry_path(args)
    registry = Registry.load(path)
    record = registry.revoke(args.vehicle)
    registry.save(path)
    print(f"revoked: {record.id_a.hex()}")
    return 0


def _pick_vehicle(registry, wanted):
    if wanted is not None:
        return registry.find(wanted)
    vehicles = [rec for rec in registry.vehicles if not rec.revoked]
    if len(vehicles) == 1:
        return vehicles[0]
    raise ConfigError(
        "pass --vehicle: registry has "
        + ("no active vehicles" if not vehicles else f"{len(vehicles)} active vehicles")
    )


def cmd_session(args):
    path = _registry_path(args)
    registry = Registry.load(path)
    record = _pick_vehicle(registry, args.vehicle)
    seed = _fresh_seed(args)
    runner = ScenarioRunner(registry, seed=seed, persist=lambda: registry.save(path))
    outcome = runner.run_session(record, duration=args.duration, budget=args.budget)
    registry.save(path)
    if args.transcript:
        runner.transcript.write(args.transcript)
    if outcome.phase != "completed":
        print(f"session {outcome.phase}: {outcome.reason or 'no start message received'}",
              file=sys.stderr)
        return 1
    if outcome.t4 != outcome.t5 - outcome.t1:
        print(f"internal clock inconsistency: t4={outcome.t4} t5-t1={outcome.t5 - outcome.t1}",
              file=sys.stderr)
        return 1
    invoice = registry.invoices[-1]
    if args.json:
        print(json.dumps({
            "phase": outcome.phase,
            "vehicle": outcome.id_a.hex(),
            "t1": outcome.t1,
            "t5": outcome.t5,
            "t4": outcome.t4,
            "invoice": invoice.to_obj(),
            "balance": record.balance,
        }))
    else:
        print(f"session completed for vehicle {outcome.id_a.hex()}")
        print(f"  charging display t4: {outcome.t4} ms (t5 - t1 = {outcome.t5 - outcome.t1})")
        print(f"  invoice: duration_ms={invoice.duration_ms} amount={invoice.amount}")
        print(f"  balance: {record.balance}")
    return 0


def _ephemeral_registry(seed):
    """Self-contained registry for attack runs without --registry."""
    rng = _rng(seed ^ 0xE5AB5)
    registry = Registry(group_key=rng.next_bytes(32), tariff_per_second=2)
    registry.register(rng.next_bytes(16), rng.next_bytes(32), balance=100_000, owner="demo-1")
    registry.register(rng.next_bytes(16), rng.next_bytes(32), balance=100_000, owner="demo-2")
    return registry


def _transcript_path(base, index, count, name):
    if count == 1:
        return base
    root, ext = os.path.splitext(base)
    return f"{root}-{name}{ext or '.jsonl'}"


def cmd_attack(args):
    seed = args.seed if args.seed is not None else 1
    if args.registry or os.environ.get("EVABS_REGISTRY"):
        path = _registry_path(args)

        def make_registry():
            registry = Registry.load(path)
            if not registry.vehicles:
                raise ConfigError(f"{path} has no enrolled vehicles")
            return registry

    else:
        def make_registry():
            return _ephemeral_registry(seed)

    reports = run_named_scenario(make_registry, args.scenario, seed=seed)
    text = "".join(report.to_text() for report in reports)
    if args.json:
        print(json.dumps([report.to_obj() for report in reports], indent=2))
    else:
        print(text, end="")
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    if args.transcript:
        for index, report in enumerate(reports):
            report.transcript.write(
                _transcript_path(args.transcript, index, len(reports), report.name)
            )
    return 0 if all(report.held for report in reports) else 1


def cmd_invoices(args):
    path = _registry_path(args)
    registry = Registry.load(path)
    invoices = registry.invoices_for(args.vehicle)
    if args.json:
        for invoice in invoices:
            print(json.dumps(invoice.to_obj()))
        return 0
    if not invoices:
        print("no invoices")
        return 0
    print(f"{'vehicle':<34} {'t1':>10} {'t5':>10} {'duration_ms':>12} {'amount':>8}")
    total = 0
    for invoice in invoices:
        total += invoice.amount
        print(
            f"{invoice.id_a.hex():<34} {invoice.t1:>10} {invoice.t5:>10} "
            f"{invoice.duration_ms:>12} {invoice.amount:>8}"
        )
    print(f"total: {total}")
    return 0


# -- argument plumbing ----------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evabs",
        description="authenticated street-charging simulator: provisioning, "
        "sessions, attack scenarios, invoices",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s 0.1.0 (kernel backend: {BACKEND})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_help="seed for all randomness (64-bit)"):
        p.add_argument("--registry", help="registry file (default: $EVABS_REGISTRY)")
        p.add_argument("--seed", type=_seed_value, help=seed_help)

    p = sub.add_parser("init", help="create a registry file")
    common(p, "seed for group key generation")
    p.add_argument("--tariff", type=int, required=True, help="price per started second")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("register", help="enroll a vehicle")
    common(p, "seed for credential generation")
    p.add_argument("--vehicle", type=_hex_bytes(16), help="vehicle id (32 hex); generated if absent")
    p.add_argument("--key", type=_hex_bytes(32), help="vehicle key (64 hex); generated if absent")
    p.add_argument("--balance", type=int, default=0, help="opening balance in minor units")
    p.add_argument("--owner", default="", help="free-form owner label")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("revoke", help="disable a vehicle")
    common(p)
    p.add_argument("--vehicle", type=_hex_bytes(16), required=True)
    p.set_defaults(func=cmd_revoke)

    p = sub.add_parser("session", help="run one honest charge session")
    common(p)
    p.add_argument("--vehicle", type=_hex_bytes(16), help="defaults to the only active vehicle")
    p.add_argument("--duration", type=int, required=True, help="planned charge time in ms")
    p.add_argument("--budget", type=int, help="cut charging once accrued cost reaches this")
    p.add_argument("--transcript", help="write the frame transcript (JSON lines)")
    p.add_argument("--json", action="store_true", help="machine-readable result")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("attack", help="run an adversary scenario")
    common(p)
    p.add_argument(
        "--scenario",
        required=True,
        help="shipped name, alias, or path to a scenario file (shipped: "
        + ", ".join(builtin_scenarios() + sorted(SCENARIO_ALIASES)) + ")",
    )
    p.add_argument("--transcript", help="write the frame transcript (JSON lines)")
    p.add_argument("--report", help="write the verdict report to a file")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("invoices", help="list issued invoices")
    common(p)
    p.add_argument("--vehicle", type=_hex_bytes(16), help="filter by vehicle id")
    p.add_argument("--json", action="store_true", help="one JSON object per line")
    p.set_defaults(func=cmd_invoices)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "duration", None) is not None and args.duration < 0:
        parser.error("--duration must be non-negative")
    try:
        return args.func(args)
    except (ConfigError, ScriptError, InvalidInput, InvalidSeed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StorageError as exc:
        print(f"storage error: {exc}", file=sys.stderr)
        return 3
    except EvabsError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
