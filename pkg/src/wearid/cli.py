"""Command-line pipeline: synth / gestures / attack / report.

Each subcommand reads one JSON config (schema below, unknown keys are
rejected), derives all randomness from the single top-level seed, and
writes artifacts plus a manifest into the configured output directory.
Running a command twice with the same config yields byte-identical JSON
and CSV artifacts.

Exit codes: 0 success, 2 config error, 3 data error, 4 experiment error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigError, ExperimentError, FormatError,
                     InsufficientDataError, MissingChannelError, PairSamplingError)
from . import attack_eval, ingest, physio, rpencode
from .gesture import (GestureClass, GestureModel, GestureSvmConfig, GestureWindow,
                      RqaParams, localize_gestures, train_gesture_svm,
                      training_windows)

ONSET_MATCH_TOLERANCE = 16  # samples, half the detection hop window

_TOP_KEYS = {"seed", "out_dir", "synth", "datasets", "gesture", "encoding", "experiment"}
_SYNTH_KEYS = {"n_subjects", "n_sessions", "gestures_per_session", "gesture_classes",
               "identity_separation", "noise_sd"}
_DATASET_KEYS = {"name", "path", "format", "ground_truth"}
_GESTURE_KEYS = {"embed_dim", "delay", "epsilon_scale", "window", "overlap",
                 "det_threshold", "confidence_threshold", "resample_len", "model_path"}
_ENCODING_KEYS = {"image_side"}
_EXPERIMENT_KEYS = {"signal_kinds", "n_train_episodes", "n_repetitions",
                    "train_fraction", "max_pairs", "windows", "episode_grid",
                    "physio_len", "d_img", "d_phys", "conv_channels", "lstm_hidden",
                    "lstm_layers", "lambda_ver", "lambda_id", "margin",
                    "epochs", "lr", "batch_size", "momentum"}


def _check_keys(section: dict, allowed: set, path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) under {path}: {sorted(unknown)}")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(config, _TOP_KEYS, "the config root")
    for key in ("seed", "out_dir"):
        if key not in config:
            raise ConfigError(f"config is missing the required key {key!r}")
    if not isinstance(config["seed"], int) or config["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if "synth" in config:
        _check_keys(config["synth"], _SYNTH_KEYS, "synth")
    if "gesture" in config:
        _check_keys(config["gesture"], _GESTURE_KEYS, "gesture")
    if "encoding" in config:
        _check_keys(config["encoding"], _ENCODING_KEYS, "encoding")
    if "experiment" in config:
        _check_keys(config["experiment"], _EXPERIMENT_KEYS, "experiment")
        for kind in config["experiment"].get("signal_kinds", []):
            try:
                physio.SignalKind(kind)
            except ValueError:
                raise ConfigError(
                    f"experiment.signal_kinds contains unknown kind {kind!r}") from None
    for i, entry in enumerate(config.get("datasets", [])):
        _check_keys(entry, _DATASET_KEYS, f"datasets[{i}]")
        for key in ("name", "path"):
            if key not in entry:
                raise ConfigError(f"datasets[{i}] is missing the required key {key!r}")
        if entry.get("format", "e4") not in ("e4", "generic"):
            raise ConfigError(f"datasets[{i}].format must be 'e4' or 'generic'")
    return config


def _config_sha256(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(config: dict, command: str, artifacts: list[Path]) -> Path:
    import torch
    out_dir = Path(config["out_dir"])
    manifest = {
        "command": command,
        "config_sha256": _config_sha256(config),
        "seed": config["seed"],
        "artifacts": sorted(str(p.relative_to(out_dir)) for p in artifacts),
        "versions": {
            "wearid": __version__,
            "numpy": np.__version__,
            "torch": torch.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    path = out_dir / f"manifest_{command}.json"
    _write_json(path, manifest)
    return path


# ---------------------------------------------------------------------------
# Dataset loading shared by gestures/attack
# ---------------------------------------------------------------------------

def _session_dirname(subject_id: str, session_id: str) -> str:
    return f"{subject_id}__{session_id}"


def _load_dataset(entry: dict) -> tuple[list[ingest.SensorRecording], list | None]:
    """Load recordings (one subdirectory per session) plus optional truth."""
    root = Path(entry["path"])
    if not root.is_dir():
        raise FormatError(f"dataset {entry['name']!r}: directory not found: {root}")
    loader = (ingest.load_e4_recording if entry.get("format", "e4") == "e4"
              else ingest.load_generic_recording)
    recordings = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if "__" not in sub.name:
            continue
        subject_id, session_id = sub.name.split("__", 1)
        recordings.append(loader(sub, subject_id, session_id))
    if not recordings:
        raise FormatError(f"dataset {entry['name']!r}: no recordings under {root}")
    truths = None
    if entry.get("ground_truth"):
        gt_path = Path(entry["ground_truth"])
        if not gt_path.exists():
            raise FormatError(f"dataset {entry['name']!r}: ground truth file "
                              f"not found: {gt_path}")
        truths = ingest.load_ground_truth(gt_path)
    return recordings, truths


def _truth_for(truths, recording) -> ingest.RecordingTruth | None:
    if truths is None:
        return None
    for t in truths:
        if t.subject_id == recording.subject_id and t.session_id == recording.session_id:
            return t
    return None


def _rqa_params(config: dict) -> RqaParams:
    g = config.get("gesture", {})
    return RqaParams(
        embed_dim=g.get("embed_dim", 3),
        delay=g.get("delay", 4),
        epsilon_scale=g.get("epsilon_scale", 0.2),
        window=g.get("window", 80),
        overlap=g.get("overlap", 0.8),
        det_threshold=g.get("det_threshold", 0.7),
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(config: dict) -> int:
    if "synth" not in config:
        raise ConfigError("the synth command requires a 'synth' section")
    s = config["synth"]
    if "n_subjects" not in s:
        raise ConfigError("synth.n_subjects is required")
    synth_config = ingest.SynthConfig(
        n_subjects=s["n_subjects"],
        n_sessions=s.get("n_sessions", 1),
        gestures_per_session=s.get("gestures_per_session", 20),
        gesture_classes=tuple(s.get("gesture_classes") or ()),
        identity_separation=s.get("identity_separation", 0.8),
        noise_sd=s.get("noise_sd", 0.002),
        seed=config["seed"],
    )
    recordings, truths = ingest.synth_generate(synth_config)
    data_dir = Path(config["out_dir"]) / "data"
    artifacts = []
    for rec in recordings:
        session_dir = data_dir / _session_dirname(rec.subject_id, rec.session_id)
        ingest.write_e4_recording(rec, session_dir)
        artifacts += sorted(session_dir.iterdir())
    gt_path = data_dir / "ground_truth.json"
    ingest.save_ground_truth(truths, gt_path)
    artifacts.append(gt_path)
    artifacts.append(_write_manifest(config, "synth", artifacts))
    print(f"wrote {len(recordings)} recordings and ground truth under {data_dir}")
    return 0


def _match_detections(detected, truth_windows, tolerance=ONSET_MATCH_TOLERANCE):
    """Greedy one-to-one matching on onset distance; returns stats."""
    unmatched = list(range(len(detected)))
    hits = 0
    label_hits = 0
    for tw in truth_windows:
        best, best_err = None, tolerance + 1
        for k in unmatched:
            err = abs(detected[k].start - tw.start)
            if err < best_err:
                best, best_err = k, err
        if best is not None and best_err <= tolerance:
            unmatched.remove(best)
            hits += 1
            label_hits += int(detected[best].label == tw.label)
    return {
        "n_true": len(truth_windows),
        "n_detected": len(detected),
        "matched": hits,
        "recall": hits / len(truth_windows) if truth_windows else None,
        "precision": hits / len(detected) if detected else None,
        "label_accuracy": label_hits / hits if hits else None,
    }


def cmd_gestures(config: dict, dump_images: bool = False,
                 dump_signals: bool = False) -> int:
    if not config.get("datasets"):
        raise ConfigError("the gestures command requires a 'datasets' section")
    out_dir = Path(config["out_dir"])
    params = _rqa_params(config)
    g = config.get("gesture", {})
    conf_threshold = g.get("confidence_threshold", 0.5)
    image_side = config.get("encoding", {}).get("image_side", 64)
    artifacts = []
    detection_report = {}

    for entry in config["datasets"]:
        recordings, truths = _load_dataset(entry)

        if g.get("model_path"):
            model = GestureModel.load(g["model_path"])
        elif truths is not None:
            labeled = []
            for rec in recordings:
                truth = _truth_for(truths, rec)
                if truth is None:
                    continue
                labeled += training_windows(rec.acc(), truth.windows)
            model = train_gesture_svm(labeled, GestureSvmConfig(
                resample_len=g.get("resample_len", 40)))
            model_path = out_dir / f"gesture_model_{entry['name']}.pkl"
            model_path.parent.mkdir(parents=True, exist_ok=True)
            model.save(model_path)
            artifacts.append(model_path)
        else:
            raise ConfigError(f"dataset {entry['name']!r}: gesture classification "
                              "needs ground truth labels or gesture.model_path")

        per_recording = []
        for rec in recordings:
            windows = localize_gestures(rec.acc(), model, params, conf_threshold)
            win_path = (out_dir / "windows" / entry["name"]
                        / f"{_session_dirname(rec.subject_id, rec.session_id)}.json")
            _write_json(win_path, {
                "subject_id": rec.subject_id,
                "session_id": rec.session_id,
                "windows": [{"start": w.start, "end": w.end, "class": w.label.value,
                             "confidence": round(w.confidence, 6)} for w in windows],
            })
            artifacts.append(win_path)

            truth = _truth_for(truths, rec)
            if truth is not None:
                stats = _match_detections(windows, truth.windows)
                stats["recording"] = _session_dirname(rec.subject_id, rec.session_id)
                per_recording.append(stats)

            if dump_images:
                acc = rec.acc()
                for w in windows:
                    img = rpencode.encode_acc_image(
                        acc[w.start:w.end, 0], acc[w.start:w.end, 1],
                        acc[w.start:w.end, 2], side=image_side)
                    img_path = (out_dir / "images" / entry["name"]
                                / f"{_session_dirname(rec.subject_id, rec.session_id)}"
                                  f"_{w.start}.png")
                    img_path.parent.mkdir(parents=True, exist_ok=True)
                    rpencode.save_png(img, img_path)
                    artifacts.append(img_path)
            if dump_signals:
                for kind in physio.SignalKind:
                    try:
                        series = physio.select_signal(rec, kind)
                    except (MissingChannelError, InsufficientDataError):
                        continue
                    if series.times is not None:
                        continue  # irregular series have no single rate
                    sig_path = (out_dir / "signals" / entry["name"]
                                / _session_dirname(rec.subject_id, rec.session_id)
                                / f"{kind.value}.csv")
                    sig_path.parent.mkdir(parents=True, exist_ok=True)
                    ingest.write_generic_csv(sig_path, series.start_time,
                                             series.rate, series.values)
                    artifacts.append(sig_path)

        if per_recording:
            matched = sum(r["matched"] for r in per_recording)
            n_true = sum(r["n_true"] for r in per_recording)
            n_det = sum(r["n_detected"] for r in per_recording)
            detection_report[entry["name"]] = {
                "recall": matched / n_true if n_true else None,
                "precision": matched / n_det if n_det else None,
                "per_recording": per_recording,
            }

    if detection_report:
        report_path = out_dir / "detection_report.json"
        _write_json(report_path, detection_report)
        artifacts.append(report_path)
        for name, stats in detection_report.items():
            print(f"{name}: recall {stats['recall']:.3f} precision {stats['precision']:.3f}")
    artifacts.append(_write_manifest(config, "gestures", artifacts))
    return 0


def _load_detected_windows(out_dir: Path, dataset_name: str,
                           recording) -> list[GestureWindow]:
    path = (out_dir / "windows" / dataset_name
            / f"{_session_dirname(recording.subject_id, recording.session_id)}.json")
    if not path.exists():
        raise FormatError(f"no detected windows at {path}; run the gestures "
                          "command first or set experiment.windows to 'truth'")
    data = json.loads(path.read_text())
    return [GestureWindow(start=w["start"], end=w["end"],
                          label=GestureClass(w["class"]),
                          confidence=w.get("confidence", 1.0))
            for w in data["windows"]]


def cmd_attack(config: dict, with_curve: bool = False) -> int:
    if not config.get("datasets"):
        raise ConfigError("the attack command requires a 'datasets' section")
    if "experiment" not in config:
        raise ConfigError("the attack command requires an 'experiment' section")
    e = dict(config["experiment"])
    window_source = e.pop("windows", "truth")
    if window_source not in ("truth", "detected"):
        raise ConfigError("experiment.windows must be 'truth' or 'detected'")
    episode_grid = e.pop("episode_grid", None)
    if with_curve and not episode_grid:
        raise ConfigError("--curve requires experiment.episode_grid")
    if "signal_kinds" not in e:
        raise ConfigError("experiment.signal_kinds is required")
    image_side = config.get("encoding", {}).get("image_side", 64)
    exp_config = attack_eval.ExperimentConfig(seed=config["seed"],
                                              image_side=image_side, **e)

    out_dir = Path(config["out_dir"])
    kinds = list(exp_config.signal_kinds)
    datasets = {}
    for entry in config["datasets"]:
        recordings, truths = _load_dataset(entry)
        samples = []
        for rec in recordings:
            if window_source == "truth":
                truth = _truth_for(truths, rec)
                if truth is None:
                    raise FormatError(f"dataset {entry['name']!r}: no ground-truth "
                                      f"windows for {rec.subject_id}/{rec.session_id}")
                windows = truth.windows
            else:
                windows = _load_detected_windows(out_dir, entry["name"], rec)
            samples += attack_eval.build_window_samples(
                rec, windows, kinds, image_side=image_side,
                physio_len=exp_config.physio_len)
        if not samples:
            raise ExperimentError(f"dataset {entry['name']!r} produced no usable "
                                  "gesture windows")
        datasets[entry["name"]] = samples

    report = attack_eval.run_experiment(datasets, exp_config)
    if with_curve:
        for name, samples in datasets.items():
            points = attack_eval.learning_curve(name, samples, exp_config, episode_grid)
            report.curves[name] = {exp_config.signal_kinds[0].value: points}

    report_dir = out_dir / "report"
    artifacts = attack_eval.render_report(report, report_dir)
    artifacts.append(_write_manifest(config, "attack", artifacts))
    for name in report.datasets:
        for kind in report.signal_kinds:
            cell = report.cells[name][kind]
            if cell is None:
                print(f"{name}/{kind}: absent")
            else:
                mean, sd = cell.mean_sd()
                print(f"{name}/{kind}: {100 * mean:.2f}% +- {100 * sd:.2f}%")
    return 0


def cmd_report(report_path: str, out_dir: str) -> int:
    path = Path(report_path)
    if not path.exists():
        raise FormatError(f"report file not found: {path}")
    report = attack_eval.report_from_json(json.loads(path.read_text()))
    written = attack_eval.render_report(report, out_dir)
    print(f"rendered {len(written)} artifact(s) under {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wearid",
        description="Gesture-conditioned physiological re-identification pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p_synth.add_argument("config", help="path to the JSON pipeline config")

    p_gest = sub.add_parser("gestures", help="detect, classify, and localize gestures")
    p_gest.add_argument("config")
    p_gest.add_argument("--dump-images", action="store_true",
                        help="write a PNG recurrence-plot image per detected window")
    p_gest.add_argument("--dump-signals", action="store_true",
                        help="write derived physiological series as generic CSVs")

    p_attack = sub.add_parser("attack", help="run the re-identification experiment")
    p_attack.add_argument("config")
    p_attack.add_argument("--curve", action="store_true",
                          help="also compute the learning curve over episode_grid")

    p_report = sub.add_parser("report", help="re-render artifacts from a report.json")
    p_report.add_argument("report_json")
    p_report.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(load_config(args.config))
        if args.command == "gestures":
            return cmd_gestures(load_config(args.config), args.dump_images,
                                args.dump_signals)
        if args.command == "attack":
            return cmd_attack(load_config(args.config), args.curve)
        if args.command == "report":
            return cmd_report(args.report_json, args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, MissingChannelError, InsufficientDataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ExperimentError, PairSamplingError) as exc:
        print(f"experiment error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
