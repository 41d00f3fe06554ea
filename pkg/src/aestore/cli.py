"""Command-line interface: ``aestore entangle | download | bench | analyze``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import analysis
from .bench import CSV_COLUMNS, FULL_SCALE_TRIALS, BenchSpec, format_summary, run_bench, summarize
from .codec import EmptyFileError
from .lattice import ALPHA, BlockId, BlockKind, Strand
from .manifest import ManifestError, ManifestIndex, file_digest
from .repair import IntegrityError, RepairConfig, download, entangle
from .store import (
    ChunkAddress,
    DiskStore,
    FailureInjectingStore,
    FailurePolicy,
    GatewayStore,
    MemoryStore,
    PermanentRejectionError,
    StoreUnavailableError,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_IRRECOVERABLE = 3
EXIT_INTEGRITY = 4

DEFAULT_STORE_DIR = ".aestore-chunks"

log = logging.getLogger("aestore")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="JSON file with option defaults (flags override it)")
    g.add_argument("--alpha", type=int, default=ALPHA)
    g.add_argument("--s", type=int, default=5, help="horizontal strands")
    g.add_argument("--p", type=int, default=5, help="helical strands per direction")
    g.add_argument("--block-size", type=int, default=4096)
    g.add_argument("--backend", choices=("memory", "disk", "gateway"), default="disk")
    g.add_argument("--store-dir", default=DEFAULT_STORE_DIR)
    g.add_argument("--gateway-url")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--deterministic", action="store_true",
                   help="single-threaded, no hedging; request counts depend only on the failure set")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _csv_words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def parse_block_id(text: str) -> BlockId:
    """``d7`` -> data node 7; ``p7H`` / ``p-2RH`` -> parity leaving node 7 / seed -2."""
    t = text.strip()
    if t.startswith("d"):
        return BlockId.data(int(t[1:]))
    if t.startswith("p"):
        for x in sorted(Strand, key=lambda s: -len(s.value)):
            if t.endswith(x.value):
                return BlockId(BlockKind.PARITY, int(t[1:-len(x.value)]), x)
    raise argparse.ArgumentTypeError(f"not a block id: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aestore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entangle", parents=[_common()], help="encode a file and store its chunks")
    p.add_argument("input")
    p.add_argument("-o", "--manifest", help="manifest path (default: <input>.manifest.json)")

    p = sub.add_parser("download", parents=[_common()], help="retrieve a file, repairing as needed")
    p.add_argument("manifest")
    p.add_argument("output")
    p.add_argument("--strategy", choices=("hierarchical", "round_robin"), default="hierarchical")
    p.add_argument("--failure-rate", type=float, default=0.0,
                   help="withhold each chunk with this probability (seeded by --seed)")
    p.add_argument("--blocklist", nargs="*", default=[], metavar="HEX", help="chunk addresses to withhold")
    p.add_argument("--fail-block", nargs="*", default=[], type=parse_block_id, metavar="ID",
                   help="lattice blocks to withhold, e.g. d7 p12H")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--hedge-delay-ms", type=float, default=150.0)
    p.add_argument("--timeout", type=float, default=None, help="per-request timeout in seconds")
    p.add_argument("--csv", help="append a result row to this CSV file")

    p = sub.add_parser("bench", parents=[_common()], help="run the failure-injection benchmark")
    p.add_argument("--rates", type=_csv_floats, default=[0.0, 0.05, 0.10, 0.15])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--full-scale", action="store_true", help=f"run {FULL_SCALE_TRIALS} trials per rate")
    p.add_argument("--strategies", type=_csv_words, default=["hierarchical", "round_robin"])
    p.add_argument("--file-size", type=int, default=1 << 20)
    p.add_argument("--out-csv", default="bench.csv")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--hedge-delay-ms", type=float, default=150.0)
    p.add_argument("--latency-ms", type=float, default=0.0,
                   help="median simulated per-request latency (0 disables)")
    p.add_argument("--latency-sigma", type=float, default=0.0, help="log-normal spread of the latency")
    p.set_defaults(backend="memory")

    p = sub.add_parser("analyze", parents=[_common()], help="print the redundancy comparison table")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of a text table")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config) as f:
            defaults = {k.replace("-", "_"): v for k, v in json.load(f).items()}
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def open_store(args):
    if args.backend == "memory":
        return MemoryStore()
    if args.backend == "disk":
        return DiskStore(args.store_dir)
    if not args.gateway_url:
        raise SystemExit("--backend gateway needs --gateway-url")
    return GatewayStore(args.gateway_url)


def cmd_entangle(args) -> int:
    try:
        with open(args.input, "rb") as f:
            data = f.read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        store = open_store(args)
        manifest = entangle(data, store, block_size=args.block_size, s=args.s, p=args.p)
    except EmptyFileError:
        print("error: input file is empty", file=sys.stderr)
        return EXIT_IO
    except (StoreUnavailableError, PermanentRejectionError, OSError) as e:
        print(f"error: store failure: {e}", file=sys.stderr)
        return EXIT_IO
    path = args.manifest or args.input + ".manifest.json"
    manifest.save(path)
    lat = manifest.lattice
    stored = manifest.codec.block_size * len(manifest.entries)
    print(f"manifest: {path}")
    print(f"data chunks: {lat.n_data}")
    print(f"parity chunks: {lat.n_parities} ({lat.n_seeds} strand seeds)")
    print(f"distinct addresses: {len(set(manifest.entries.values()))}")
    print(f"overhead: {stored / (lat.n_data * manifest.codec.block_size):.4f}")
    return EXIT_OK


def _append_row(path: str, row: list) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if new:
            w.writerow(CSV_COLUMNS)
        w.writerow(row)


def cmd_download(args) -> int:
    if args.backend == "memory":
        print("error: the memory backend does not persist between commands", file=sys.stderr)
        return EXIT_IO
    try:
        manifest = ManifestIndex.load(args.manifest)
    except (OSError, ManifestError) as e:
        print(f"error: cannot read manifest: {e}", file=sys.stderr)
        return EXIT_IO
    store = open_store(args)
    blocked = {ChunkAddress.from_hex(h) for h in args.blocklist}
    blocked |= {manifest.entries[b] for b in args.fail_block if b in manifest.entries}
    if blocked:
        store = FailureInjectingStore(store, FailurePolicy.blocked(blocked))
    if args.failure_rate > 0:
        store = FailureInjectingStore(store, FailurePolicy.bernoulli(args.failure_rate, args.seed))
    cfg = RepairConfig(
        strategy=args.strategy,
        max_depth=args.max_depth,
        hedge_delay=None if args.deterministic else args.hedge_delay_ms / 1000.0,
        fetch_timeout=args.timeout,
        deterministic=args.deterministic,
    )
    try:
        data, report = download(manifest, cfg, store)
    except IntegrityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTEGRITY
    except PermanentRejectionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    ok = data is not None and (manifest.source_digest is None or file_digest(data) == manifest.source_digest)
    pr = report.parity_requests_per_failure
    row = [cfg.strategy.value, f"{args.failure_rate:g}", 0, args.seed, int(ok),
           f"{report.wall_time * 1000:.3f}", report.total_blocks_requested, len(pr),
           f"{sum(pr) / len(pr) if pr else 0.0:.4f}", min(pr, default=0), max(pr, default=0)]
    if args.csv:
        _append_row(args.csv, row)
    print(",".join(CSV_COLUMNS))
    print(",".join(str(c) for c in row))
    if report.corrupted:
        print("corrupt chunks: " + " ".join(str(b) for b in report.corrupted), file=sys.stderr)
    if data is None:
        print("irrecoverable: " + " ".join(str(b) for b in report.irrecoverable), file=sys.stderr)
        return EXIT_IRRECOVERABLE
    try:
        with open(args.output, "wb") as f:
            f.write(data)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if ok else EXIT_INTEGRITY


def cmd_bench(args) -> int:
    spec = BenchSpec(
        file_size=args.file_size,
        s=args.s,
        p=args.p,
        block_size=args.block_size,
        failure_rates=args.rates,
        trials=FULL_SCALE_TRIALS if args.full_scale else args.trials,
        strategies=args.strategies,
        seed=args.seed,
        backend=args.backend,
        deterministic=args.deterministic,
        max_depth=args.max_depth,
        hedge_delay=args.hedge_delay_ms / 1000.0,
        latency_median=args.latency_ms / 1000.0,
        latency_sigma=args.latency_sigma,
        store_dir=args.store_dir,
        gateway_url=args.gateway_url,
    )
    with open(args.out_csv, "w", newline="") as f:
        results = run_bench(spec, f)
    summary = format_summary(summarize(results))
    with open(os.path.splitext(args.out_csv)[0] + ".summary.csv", "w") as f:
        f.write(summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = analysis.comparison_table()
    print(analysis.render_csv(rows) if args.csv else analysis.render_text(rows))
    return EXIT_OK


COMMANDS = {
    "entangle": cmd_entangle,
    "download": cmd_download,
    "bench": cmd_bench,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.alpha != ALPHA:
        print(f"error: only --alpha {ALPHA} is supported", file=sys.stderr)
        return EXIT_IO
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
