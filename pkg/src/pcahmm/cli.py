"""Command-line entry point: ``pcahmm train | monitor | synth | elbow``.

Every flag that shadows a configuration key overrides the value from
``--config``. Exit status is 0 when a command succeeds without detecting
degradation, 2 when ``monitor`` finds a sustained alarm and 1 on error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__, detector, synth
from .config import ConfigError, PipelineConfig, load_config
from .ingest import DatasetCatalog, IngestError, load_snapshot, scan_dataset
from .modelfile import ModelFile, ModelFileError, Provenance, TrainingInfo, load, save, utc_now

log = logging.getLogger("pcahmm")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEGRADED = 2

VERDICT_HEADER = ["reading_index", "timestamp", "loglik", "zscore", "alarm"]


class CliError(Exception):
    """Stage-named failure reported on stderr with exit status 1."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_config_flags(ap: argparse.ArgumentParser) -> None:
    g = ap.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", type=Path, help="YAML configuration file")
    g.add_argument("--dataset", dest="dataset_root", help="directory of snapshot files")
    g.add_argument("--sample-rate", dest="sample_rate_hz", type=float)
    g.add_argument("--window-len", type=int)
    g.add_argument("--hop", type=int)
    g.add_argument("-p", "--components", dest="p", type=int, help="principal components per channel")
    g.add_argument("--center", dest="center", action="store_true", default=None)
    g.add_argument("--no-center", dest="center", action="store_false")
    g.add_argument("--k-range", type=int, nargs=2, metavar=("KMIN", "KMAX"))
    g.add_argument("--states", type=int, help="override the elbow choice of HMM states")
    g.add_argument("--seed", type=int)
    g.add_argument("--restarts", type=int)
    g.add_argument("--kmeans-max-iter", type=int)
    g.add_argument("--kmeans-tol", type=float)
    g.add_argument("--cluster-max-points", type=int)
    g.add_argument("--hmm-tol", type=float)
    g.add_argument("--hmm-max-iter", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--sustained", type=int, help="consecutive alarms that count as degradation")
    g.add_argument("--training-range", type=int, nargs=2, metavar=("FIRST", "LAST"))


_CONFIG_KEYS = ("dataset_root", "sample_rate_hz", "window_len", "hop", "p", "center", "k_range", "states",
                "seed", "restarts", "kmeans_max_iter", "kmeans_tol", "cluster_max_points", "hmm_tol",
                "hmm_max_iter", "threshold", "sustained", "training_range")


def _add_channel_flags(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--bearing", help="bearing name from the channel map (e.g. bearing2)")
    ap.add_argument("--channels", type=_int_list, help="explicit 1-based column indices, e.g. 3,4")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcahmm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="fit the detector on the healthy training range")
    _add_config_flags(tr)
    _add_channel_flags(tr)
    tr.add_argument("--model", type=Path, required=True, help="output model file (JSON)")
    tr.add_argument("--elbow-csv", type=Path, help="also write the k,wcss curve here")

    mo = sub.add_parser("monitor", help="score every snapshot of a run against a trained model")
    mo.add_argument("--model", type=Path, required=True)
    mo.add_argument("--dataset", dest="dataset_root", help="defaults to the dataset the model was trained on")
    mo.add_argument("--sustained", type=int, help="defaults to the model's configuration")
    _add_channel_flags(mo)
    mo.add_argument("--out", type=Path, help="verdict CSV (default: stdout)")

    sy = sub.add_parser("synth", help="write a synthetic run-to-failure dataset")
    sy.add_argument("--out", type=Path, required=True, help="output directory")
    sy.add_argument("--profile", type=Path, help="YAML run profile")
    sy.add_argument("--n-snapshots", type=int)
    sy.add_argument("--samples", dest="samples_per_snapshot", type=int)
    sy.add_argument("--n-channels", dest="channels", type=int)
    sy.add_argument("--onset", dest="fault_onset_index", type=int)
    sy.add_argument("--seed", type=int)

    el = sub.add_parser("elbow", help="write the k-vs-WCSS curve of the training features")
    _add_config_flags(el)
    _add_channel_flags(el)
    el.add_argument("--out", type=Path, help="elbow CSV (default: stdout)")
    return ap


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    try:
        cfg = load_config(args.config)
        overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
        return cfg.updated(**overrides)
    except ConfigError as exc:
        raise CliError("config", str(exc)) from None
    except TypeError as exc:
        raise CliError("config", f"bad configuration value: {exc}") from None


def _catalog(root, cfg: PipelineConfig) -> DatasetCatalog:
    if not root:
        raise CliError("ingest", "no dataset given (use --dataset or dataset_root in the config)")
    try:
        return scan_dataset(root, cfg.channel_map)
    except IngestError as exc:
        raise CliError("ingest", str(exc)) from None


def _channels(args, catalog: DatasetCatalog, fallback: Sequence[int] = ()) -> list[int]:
    if args.channels:
        return list(args.channels)
    if args.bearing:
        try:
            return catalog.channels_for(args.bearing)
        except IngestError as exc:
            raise CliError("ingest", str(exc)) from None
    if fallback:
        return list(fallback)
    raise CliError("ingest", "choose a bearing with --bearing or columns with --channels")


def _training_records(catalog: DatasetCatalog, cfg: PipelineConfig, channels: Sequence[int]):
    try:
        if cfg.training_range is not None:
            rng = detector.TrainingRange(*cfg.training_range)
        else:
            rng = detector.select_training_range(len(catalog))
        if rng.last > len(catalog):
            raise detector.DetectorError(f"training range {rng.first}..{rng.last} exceeds the {len(catalog)} readings")
    except detector.DetectorError as exc:
        raise CliError("training range", str(exc)) from None
    log.info("loading readings %d..%d", rng.first, rng.last)
    try:
        records = [load_snapshot(catalog[i], channels, cfg.sample_rate_hz) for i in rng]
    except IngestError as exc:
        raise CliError("ingest", str(exc)) from None
    return rng, records


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    catalog = _catalog(cfg.dataset_root, cfg)
    channels = _channels(args, catalog)
    rng, records = _training_records(catalog, cfg, channels)
    try:
        det, summary = detector.train_detector(records, cfg, readings=list(rng))
    except ValueError as exc:
        raise CliError("training", str(exc)) from None

    final_ll = summary.trace.ll_history[-1] if summary.trace.ll_history else math.nan
    model = ModelFile(
        config=cfg,
        detector=det,
        training_range=rng,
        training=TrainingInfo(seed=cfg.seed, iterations=summary.trace.iterations, converged=summary.trace.converged,
                              final_ll=final_ll, bearing=args.bearing, channels=channels),
        provenance=Provenance(dataset_hash=catalog.fingerprint(), tool_version=__version__, created_utc=utc_now(),
                              first_timestamp=catalog[rng.first].timestamp.isoformat(),
                              last_timestamp=catalog[rng.last].timestamp.isoformat()),
    )
    if args.elbow_csv:
        args.elbow_csv.write_text(summary.elbow.to_csv())
    try:
        save(model, args.model)
    except OSError as exc:
        raise CliError("save", f"cannot write model {str(args.model)!r}: {exc}") from None

    b = det.baseline
    print(f"training readings: {rng.first}..{rng.last} ({len(rng)} snapshots)")
    print("variance retained: " + ", ".join(
        f"{W.channel_label}={v:.4f}" for W, v in zip(det.projections, summary.variance_retained)))
    print(f"selected k: {summary.elbow.selected_k}")
    print(f"final log-likelihood: {final_ll:.6g} after {summary.trace.iterations} EM iterations"
          f"{'' if summary.trace.converged else ' (not converged)'}")
    print(f"baseline: mean {b.mean_ll:.6g}, std {b.std_ll:.6g} over {b.n} snapshots")
    print(f"Shapiro-Wilk: W={b.shapiro_w:.4f} p={b.shapiro_p:.4g} ({'normal' if b.normality_ok else 'NOT normal'})")
    print(f"model written to {args.model}")
    return EXIT_OK


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_verdicts(verdicts, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(VERDICT_HEADER)
    for v in verdicts:
        ts = v.timestamp.isoformat() if v.timestamp is not None else ""
        w.writerow([v.reading_index, ts, _fmt(v.loglik), _fmt(v.zscore), int(v.alarm)])


def cmd_monitor(args) -> int:
    try:
        model = load(args.model)
    except ModelFileError as exc:
        raise CliError("model", str(exc)) from None
    cfg = model.config
    root = args.dataset_root or cfg.dataset_root
    catalog = _catalog(root, cfg)
    channels = _channels(args, catalog, model.training.channels)
    try:
        verdicts = detector.monitor_run(catalog, model.detector, channels=channels, sample_rate_hz=cfg.sample_rate_hz)
    except (detector.DetectorError, IngestError) as exc:
        raise CliError("monitor", str(exc)) from None

    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_verdicts(verdicts, fh)
    else:
        write_verdicts(verdicts, sys.stdout)

    out = sys.stderr if args.out is None else sys.stdout
    count = args.sustained or cfg.sustained
    onset = detector.sustained_onset(verdicts, count)
    errors = [v for v in verdicts if v.error]
    for v in errors:
        print(f"reading {v.reading_index}: {v.error}", file=sys.stderr)
    train = [v for v in verdicts if v.reading_index in model.training_range and not v.error]
    train_rate = sum(v.alarm for v in train) / len(train) if train else math.nan
    print(f"readings: {len(verdicts)} (last {verdicts[-1].reading_index if verdicts else '-'}), "
          f"alarms: {sum(v.alarm for v in verdicts)}, errors: {len(errors)}", file=out)
    print(f"training-range alarm fraction: {train_rate:.3f}", file=out)
    if onset is None:
        print(f"no sustained alarm ({count} consecutive)", file=out)
        return EXIT_OK
    print(f"first sustained alarm ({count} consecutive) at reading {onset}", file=out)
    return EXIT_DEGRADED


def cmd_synth(args) -> int:
    data = {}
    if args.profile:
        try:
            data = yaml.safe_load(args.profile.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise CliError("config", f"cannot read profile {str(args.profile)!r}: {exc}") from None
    for key in ("n_snapshots", "samples_per_snapshot", "channels", "fault_onset_index", "seed"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    try:
        profile = synth.RunProfile.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CliError("config", f"invalid run profile: {exc}") from None
    try:
        paths = synth.write_run(profile, args.out)
    except OSError as exc:
        raise CliError("synth", str(exc)) from None
    print(f"wrote {len(paths)} snapshots to {args.out} (fault onset at reading {profile.fault_onset_index})")
    return EXIT_OK


def cmd_elbow(args) -> int:
    cfg = resolve_config(args)
    catalog = _catalog(cfg.dataset_root, cfg)
    channels = _channels(args, catalog)
    _, records = _training_records(catalog, cfg, channels)
    try:
        curve = detector.elbow_curve(records, cfg)
    except ValueError as exc:
        raise CliError("elbow", str(exc)) from None
    if args.out:
        args.out.write_text(curve.to_csv())
        print(f"selected k: {curve.selected_k}")
    else:
        sys.stdout.write(curve.to_csv())
    return EXIT_OK


COMMANDS = {"train": cmd_train, "monitor": cmd_monitor, "synth": cmd_synth, "elbow": cmd_elbow}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"pcahmm {args.command}: error in {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
