"""Command-line entry point.

Subcommands: conformance run, comp design, spl compute, sweep measure,
node run, server run, compare. The default seed is 1; the ACSLM_SEED
environment variable overrides it and --seed overrides both. Identical
argv and seed produce byte-identical report/CSV artifacts.
"""

import argparse
import json
import os
import sys
from pathlib import Path


def _default_seed():
    try:
        return int(os.environ.get("ACSLM_SEED", "1"))
    except ValueError:
        return 1


def _cmd_conformance(args):
    from .conformance.report import emit_report, render_table
    from .conformance.suite import run_suite

    reports = run_suite(
        profile=args.profile, seed=args.seed, rate=args.rate, quick=args.quick
    )
    doc = emit_report(reports, seed=args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    sys.stdout.write(render_table(reports))
    return 0 if doc["overall_pass"] else 1


def _cmd_comp_design(args):
    from .compensation import average_responses, design_regularized_inverse
    from .response import MagnitudeResponse

    curves = [MagnitudeResponse.from_csv(p) for p in args.responses]
    if len(curves) == 1:
        avg = curves[0]
        print(f"single response loaded from {args.responses[0]}")
    else:
        avg, stats = average_responses(curves)
        print(
            f"averaged {stats.n} responses: max pairwise diff "
            f"{stats.max_pairwise_diff_db:.2f} dB, mean std {stats.mean_std_db:.2f} dB"
        )
    filt = design_regularized_inverse(
        avg,
        n_taps=args.taps,
        taper_band=tuple(args.taper),
        sample_rate_hz=args.rate,
    )
    filt.save(args.out)
    print(f"wrote {len(filt.taps)}-tap inverse filter to {args.out}")
    if args.csv:
        filt.export_csv(args.csv)
    return 0


def _cmd_spl_compute(args):
    from .audio import read_wav
    from .meter import FAST, SLOW
    from .pipeline import SlmPipeline

    buf = read_wav(args.infile)
    detector = {"fast": FAST, "slow": SLOW}[args.detector]
    pipeline = SlmPipeline(
        rate=buf.sample_rate_hz, weighting=args.weighting, detector=detector
    )
    pipeline.calibrate(target_dba=args.cal)
    series = pipeline.measure(buf.samples)
    series.to_csv(args.out)
    tail = series.levels_dba[len(series) // 2 :]
    print(
        f"{len(series)} readings; plateau {tail.mean():.2f} dBA; "
        f"max hold {series.max_hold_dba:.2f} dBA -> {args.out}"
    )
    return 0


def _cmd_sweep_measure(args):
    from .audio import SampleBuffer, amplitude_for_spl
    from .micmodel import MicResponseModel, simulate_microphone
    from .response import MagnitudeResponse, flat_response
    from .sweep import deconvolve, generate_sweep, magnitude_from_ir, subtract_reference

    import numpy as np

    curve = MagnitudeResponse.from_csv(args.through)
    sw = generate_sweep(args.f_start, args.f_end, args.duration, args.rate)
    drive = SampleBuffer(
        sw.samples.samples * amplitude_for_spl(args.level), args.rate
    )
    irs = []
    for i in range(args.averages):
        model_i = MicResponseModel(
            response=curve, noise_enabled=args.noise, seed=args.seed + i
        )
        rec = simulate_microphone(drive, model_i)
        if rec.clipped:
            print("warning: microphone clipped during the sweep", file=sys.stderr)
        ir = deconvolve(rec, sw)
        irs.append(ir.samples.samples)
    if len(irs) == 1:
        avg_ir = irs[0]
        peak = int(np.argmax(np.abs(avg_ir)))
    else:
        n = min(len(x) for x in irs)
        avg_ir = np.mean([x[:n] for x in irs], axis=0)
        peak = int(np.argmax(np.abs(avg_ir)))
    from .sweep import ImpulseResponse

    mag = magnitude_from_ir(
        ImpulseResponse(SampleBuffer(avg_ir, args.rate), peak),
        smoothing=args.smoothing,
    )
    result = subtract_reference(mag, flat_response())
    grid = np.geomspace(20.0, min(20000.0, args.rate / 2 * 0.98), args.points)
    result.resampled(grid).to_csv(args.out)
    print(f"wrote measured response ({args.points} points) to {args.out}")
    return 0


def _cmd_node_run(args):
    from .nodenet.node import NodeRuntime, SyntheticSource, VirtualClock, WallClock
    from .nodenet.transport import TcpTransport

    host, port = args.server.rsplit(":", 1)
    public_key = Path(args.server_key).read_bytes()
    node = NodeRuntime(
        node_id=args.node_id,
        source=SyntheticSource(rate=args.rate, seed=args.seed),
        server_public_key=public_key,
        transport=TcpTransport(host or "127.0.0.1", int(port)),
        storage_dir=args.storage,
        rate=args.rate,
        clock=WallClock() if args.realtime else VirtualClock(),
    )
    node.run(args.minutes)
    left = len(node.backlog) if node.backlog is not None else 0
    print(f"session done: {node.seq} segments captured, {left} left in backlog")
    for t, event in node.audit_log:
        print(f"  [{t:.0f}] {event}")
    return 0 if left == 0 else 1


def _cmd_server_run(args):
    from .nodenet.envelope import generate_keypair
    from .nodenet.server import IngestServer
    from .nodenet.transport import TcpFrameServer

    store = Path(args.store)
    store.mkdir(parents=True, exist_ok=True)
    key_path = store / "server.key"
    pub_path = store / "server.pub"
    if not key_path.exists():
        private_pem, public_pem = generate_keypair()
        key_path.write_bytes(private_pem)
        pub_path.write_bytes(public_pem)
        print(f"generated keypair; public key at {pub_path}")
    server = IngestServer(store, key_path.read_bytes())
    host, port = args.listen.rsplit(":", 1)
    tcp = TcpFrameServer((host or "127.0.0.1", int(port)), server)
    actual = tcp.server_address
    print(f"listening on {actual[0]}:{actual[1]}; store at {store}")
    if args.max_segments:
        import time

        tcp.serve_background()
        while len(server.records) < args.max_segments:
            time.sleep(0.05)
        tcp.shutdown()
        print(f"received {len(server.records)} segments; exiting")
    else:
        try:
            tcp.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def _cmd_compare(args):
    from .conformance.battery import compare_time_histories
    from .meter import SplSeries

    a = SplSeries.from_csv(args.a)
    b = SplSeries.from_csv(args.b)
    stats = compare_time_histories(a, b)
    print(json.dumps({k: round(v, 6) for k, v in stats.items()}, indent=2, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="acslm", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override ACSLM_SEED")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conformance", help="virtual conformance battery")
    psub = p.add_subparsers(dest="action", required=True)
    prun = psub.add_parser("run", help="run the battery")
    prun.add_argument("--profile", choices=("ideal", "dut"), default="ideal")
    prun.add_argument("--out", default=None, help="write JSON report here")
    prun.add_argument("--rate", type=int, default=44100)
    prun.add_argument("--quick", action="store_true", help="shortened smoke run")
    prun.add_argument("--seed", dest="seed_sub", type=int, default=None)
    prun.set_defaults(func=_cmd_conformance)

    p = sub.add_parser("comp", help="compensation filter design")
    psub = p.add_subparsers(dest="action", required=True)
    pdes = psub.add_parser("design", help="design the regularized inverse")
    pdes.add_argument("--responses", nargs="+", required=True, help="response CSV files")
    pdes.add_argument("--taps", type=int, default=8191)
    pdes.add_argument("--rate", type=int, default=44100)
    pdes.add_argument(
        "--taper", type=float, nargs=4, default=(20.0, 60.0, 16000.0, 20000.0),
        metavar=("LO_CUT", "LO_FLAT", "HI_FLAT", "HI_CUT"),
    )
    pdes.add_argument("--out", required=True, help="output .cfir path")
    pdes.add_argument("--csv", default=None, help="also export coefficients as CSV")
    pdes.set_defaults(func=_cmd_comp_design)

    p = sub.add_parser("spl", help="SPL computation from audio files")
    psub = p.add_subparsers(dest="action", required=True)
    pspl = psub.add_parser("compute", help="compute an SPL series from a WAV file")
    pspl.add_argument("--in", dest="infile", required=True)
    pspl.add_argument("--cal", type=float, default=94.0, help="reference tone level")
    pspl.add_argument("--weighting", choices=("A", "Z"), default="A")
    pspl.add_argument("--detector", choices=("fast", "slow"), default="fast")
    pspl.add_argument("--out", required=True, help="output series CSV")
    pspl.set_defaults(func=_cmd_spl_compute)

    p = sub.add_parser("sweep", help="swept-sine response measurement")
    psub = p.add_subparsers(dest="action", required=True)
    pswp = psub.add_parser("measure", help="measure a virtual microphone response")
    pswp.add_argument("--through", required=True, help="mic response curve CSV")
    pswp.add_argument("--out", required=True, help="output response CSV")
    pswp.add_argument("--rate", type=int, default=44100)
    pswp.add_argument("--f-start", type=float, default=20.0)
    pswp.add_argument("--f-end", type=float, default=20000.0)
    pswp.add_argument("--duration", type=float, default=10.0)
    pswp.add_argument("--level", type=float, default=94.0,
                      help="sweep drive level (dB, scene convention)")
    pswp.add_argument("--averages", type=int, default=1)
    pswp.add_argument("--noise", action="store_true", help="enable mic self-noise")
    pswp.add_argument("--smoothing", type=float, default=None,
                      help="fractional-octave smoothing denominator (e.g. 24)")
    pswp.add_argument("--points", type=int, default=512)
    pswp.set_defaults(func=_cmd_sweep_measure)

    p = sub.add_parser("node", help="sensor node simulation")
    psub = p.add_subparsers(dest="action", required=True)
    pnode = psub.add_parser("run", help="run a node session against a server")
    pnode.add_argument("--minutes", type=int, required=True)
    pnode.add_argument("--server", required=True, help="host:port")
    pnode.add_argument("--server-key", required=True, help="server public key PEM")
    pnode.add_argument("--storage", default="node-storage")
    pnode.add_argument("--node-id", default="node-0")
    pnode.add_argument("--rate", type=int, default=44100)
    pnode.add_argument("--realtime", action="store_true")
    pnode.set_defaults(func=_cmd_node_run)

    p = sub.add_parser("server", help="ingest server")
    psub = p.add_subparsers(dest="action", required=True)
    psrv = psub.add_parser("run", help="serve uploads over TCP")
    psrv.add_argument("--listen", required=True, help="host:port")
    psrv.add_argument("--store", required=True, help="storage directory")
    psrv.add_argument("--max-segments", type=int, default=0,
                      help="exit after this many stored segments")
    psrv.set_defaults(func=_cmd_server_run)

    p = sub.add_parser("compare", help="compare two SPL series")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    # --seed is accepted both before and after the subcommand
    if getattr(args, "seed_sub", None) is not None:
        args.seed = args.seed_sub
    if args.seed is None:
        args.seed = _default_seed()
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
