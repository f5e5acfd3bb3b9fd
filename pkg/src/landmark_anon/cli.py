"""Command-line entry point: ``lmanon``.

Every command resolves a :class:`RunConfig` from built-in defaults, an
optional TOML file (``--config``) and command-line flags, in that order of
precedence, and writes ``run.json`` next to its outputs. Failures print a
JSON error object on stderr and exit with a code identifying the cause.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import __version__
from .adapters import GeometricAdapter, ReplayAdapter
from .errors import AdapterProtocolError, CheckpointVersionError, InvalidArgumentError
from .external import ExternalAdapter, ExternalAdapterSpec
from .facepipe import MANIFEST_NAME, PreparationManifest, prepare_dataset
from .imageops import blur, pixelate
from .io import list_images, load_image, save_image

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("landmark_anon")

EXIT_GENERIC = 1
EXIT_MISSING_INPUT = 3
EXIT_ADAPTER = 4
EXIT_CHECKPOINT = 5
EXIT_INVALID = 6

ROLE_DEFAULTS = {
    "detector": "geometric",
    "segmenter": "geometric",
    "landmarker": "geometric",
    "embedder": "synthetic",
    "classifier": "synthetic",
}

# keys that never influence outputs and are left out of the config hash
UNHASHED = ("out", "plot")


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    adapters: dict = field(default_factory=dict)
    gan: dict = field(default_factory=dict)
    seed: int = 0
    image_size: int = 64
    workers: int = 1
    out: str = "."

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidArgumentError("--workers must be at least 1")
        if self.image_size < 1:
            raise InvalidArgumentError("--image-size must be positive")
        unknown = set(self.adapters) - set(ROLE_DEFAULTS)
        if unknown:
            raise InvalidArgumentError(f"unknown adapter roles: {sorted(unknown)}")

    def hashed_dict(self) -> dict:
        d = asdict(self)
        for k in UNHASHED:
            d.pop(k, None)
            d["params"].pop(k, None)
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.hashed_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def adapter_spec(self, role: str) -> str:
        return self.adapters.get(role, ROLE_DEFAULTS[role])


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _classify(exc: BaseException) -> CliError:
    if isinstance(exc, CliError):
        return exc
    if isinstance(exc, FileNotFoundError):
        return CliError(EXIT_MISSING_INPUT, "missing_input", str(exc))
    if isinstance(exc, AdapterProtocolError):
        return CliError(EXIT_ADAPTER, "adapter_protocol", str(exc))
    if isinstance(exc, CheckpointVersionError):
        return CliError(EXIT_CHECKPOINT, "checkpoint_version", str(exc))
    if isinstance(exc, (InvalidArgumentError, tomllib.TOMLDecodeError)):
        return CliError(EXIT_INVALID, "invalid_argument", str(exc))
    return CliError(EXIT_GENERIC, type(exc).__name__, str(exc))


def _load_toml(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def _parse_adapters(items) -> dict[str, str]:
    out = {}
    for item in items:
        role, sep, spec = item.partition("=")
        if not sep or not spec:
            raise InvalidArgumentError(f"--adapter expects role=spec, got {item!r}")
        out[role.strip()] = spec.strip()
    return out


def resolve_config(command: str, params: dict, common: dict) -> RunConfig:
    """Merge defaults, the TOML file and explicit flags (flags win).

    TOML layout: top-level ``seed``, ``image_size``, ``workers``, ``out``;
    tables ``[adapters]`` (role = spec), ``[gan]`` (GanConfig fields) and
    one table per command (e.g. ``[train]``, ``[eval.emotion]``) for its
    parameters.
    """
    toml = _load_toml(common.get("config"))
    section = toml
    for part in command.split("."):
        section = section.get(part, {}) if isinstance(section, dict) else {}
    merged = {k: v for k, v in section.items() if not isinstance(v, dict)}
    merged.update({k: v for k, v in params.items() if v is not None})
    adapters = dict(toml.get("adapters", {}))
    adapters.update(_parse_adapters(common.get("adapter") or ()))
    scalars = {}
    for key, default in (("seed", 0), ("image_size", 64), ("workers", 1), ("out", ".")):
        val = common.get(key)
        scalars[key] = val if val is not None else toml.get(key, default)
    return RunConfig(
        command=command,
        params=merged,
        adapters=adapters,
        gan=dict(toml.get("gan", {})),
        **scalars,
    )


def _versions() -> dict:
    import scipy
    import torch

    return {
        "landmark_anon": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "torch": torch.__version__,
    }


def _execute(command: str, params: dict, common: dict, body: Callable[[RunConfig], dict]) -> None:
    start = time.perf_counter()
    try:
        cfg = resolve_config(command, params, common)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        result = body(cfg) or {}
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error JSON
        err = _classify(exc)
        log.debug("command failed", exc_info=True)
        click.echo(json.dumps({"error": err.kind, "message": str(err), "exit_code": err.code}), err=True)
        sys.exit(err.code)
    record = {
        "command": command,
        "config": asdict(cfg),
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "versions": _versions(),
        "timings": {"seconds": round(time.perf_counter() - start, 3)},
        "result": result,
    }
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(result, sort_keys=True))


# adapters


def build_adapter(role: str, spec: str, cfg: RunConfig | None = None):
    """Instantiate an adapter from ``geometric``, ``fixture:<dir>``,
    ``external:<command>`` or ``synthetic``."""
    kind, _, arg = spec.partition(":")
    if kind == "external":
        timeout = float(cfg.params.get("adapter_timeout", 60.0)) if cfg else 60.0
        return ExternalAdapter(ExternalAdapterSpec.parse(arg, timeout=timeout))
    if role in ("detector", "segmenter", "landmarker"):
        if kind == "geometric":
            return GeometricAdapter()
        if kind == "fixture":
            if role == "segmenter":
                raise InvalidArgumentError("fixture sidecars carry no masks; use geometric or external")
            d = Path(arg)
            if not d.is_dir():
                raise FileNotFoundError(f"fixture directory not found: {d}")
            return ReplayAdapter(d)
    elif kind == "synthetic":
        from .eval import PixelStatsEmbedder, SyntheticEmotionClassifier, SyntheticTraitClassifier

        if role == "embedder":
            return PixelStatsEmbedder()
        labels = cfg.params.get("labels") if cfg else None
        if not labels:
            raise InvalidArgumentError("synthetic classifier needs a label list")
        if cfg and cfg.command == "eval.traits":
            return SyntheticTraitClassifier(labels, seed=cfg.seed)
        return SyntheticEmotionClassifier(labels, seed=cfg.seed if cfg else 0)
    raise InvalidArgumentError(f"adapter spec {spec!r} not usable for role {role}")


def _adapter(cfg: RunConfig, role: str):
    return build_adapter(role, cfg.adapter_spec(role), cfg)


def _require(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _source_items(source: Path, variant: str = "face") -> list[tuple[str, Path, dict]]:
    """(id, image path, manifest record) for a prepared dataset or plain image folder."""
    manifest_path = source / MANIFEST_NAME
    if manifest_path.exists():
        manifest = PreparationManifest.read(manifest_path)
        return [
            (Path(face[variant]).stem, source / face[variant], {**rec, "face_entry": face})
            for rec, face in manifest.face_entries()
        ]
    return [(p.stem, p, {}) for p in list_images(source)]


def _write_pairs(out: Path, rows: list[tuple[str, Path, Path, str, str | None]]) -> Path:
    from .eval import PairRecord, write_pairs_csv

    pairs = [PairRecord(i, str(o), str(a), m, lab) for i, o, a, m, lab in rows]
    path = out / "pairs.csv"
    write_pairs_csv(pairs, path)
    return path


# command group

_common = [
    click.option("--config", "config", type=click.Path(dir_okay=False), help="TOML configuration file."),
    click.option("--seed", type=int, help="Random seed."),
    click.option("--workers", type=int, help="Upper bound on parallel workers."),
    click.option("--image-size", "image_size", type=int, help="Generator resolution."),
    click.option("--adapter", multiple=True, help="role=spec, e.g. landmarker=fixture:DIR."),
    click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
]
COMMON_KEYS = ("config", "seed", "workers", "image_size", "adapter", "out")


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


def _split(kwargs: dict) -> tuple[dict, dict]:
    common = {k: kwargs.pop(k) for k in COMMON_KEYS}
    return kwargs, common


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.version_option(__version__)
def main(verbose: int) -> None:
    """Landmark-based face anonymization toolkit."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("directory", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
def fixtures(directory: str, seed: int) -> None:
    """Write the bundled 10-image fixture set (images, sidecars, labels.csv)."""
    from .synthetic import write_fixture_dataset

    write_fixture_dataset(directory, seed=seed)
    click.echo(json.dumps({"fixtures": str(Path(directory))}))


@main.command()
@click.argument("source", type=click.Path())
@click.option("--labels", "labels_csv", type=click.Path(), help="CSV with filename,label columns.")
@common_options
def prepare(**kwargs) -> None:
    """Detect, align, segment and rasterize every image in SOURCE."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        source = _require(cfg.params["source"], "source directory")
        labels = cfg.params.get("labels_csv")
        if labels:
            _require(labels, "labels file")
        manifest = prepare_dataset(
            source,
            _adapter(cfg, "detector"),
            _adapter(cfg, "segmenter"),
            _adapter(cfg, "landmarker"),
            cfg.out,
            labels_csv=labels,
            workers=cfg.workers,
        )
        return {"manifest": str(Path(cfg.out) / MANIFEST_NAME), "counts": manifest.counts}

    _execute("prepare", params, common, body)


@main.command()
@click.argument("dataset", type=click.Path(), required=False)
@click.option("--synthetic", "synthetic_pairs", type=int, help="Train on N generated pairs instead of DATASET.")
@click.option("--epochs", type=int)
@click.option("--batch-size", "batch_size", type=int)
@click.option("--lr", type=float)
@click.option("--base-channels", "base_channels", type=int)
@click.option("--lambda-l1", "lambda_l1", type=float)
@common_options
def train(**kwargs) -> None:
    """Train the generator on a prepared dataset (or synthetic pairs)."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        from .gan import GanConfig, train as fit
        from .raster import LandmarkImage

        gan = dict(cfg.gan)
        for key in ("epochs", "batch_size", "lr", "base_channels", "lambda_l1"):
            if key in cfg.params:
                gan[key] = cfg.params[key]
        gan.update(image_size=cfg.image_size, seed=cfg.seed)
        gcfg = GanConfig.from_dict(gan)
        if cfg.params.get("synthetic_pairs"):
            from .synthetic import synthetic_pairs

            pairs = synthetic_pairs(int(cfg.params["synthetic_pairs"]), cfg.image_size, seed=cfg.seed)
        else:
            if not cfg.params.get("dataset"):
                raise InvalidArgumentError("give a prepared DATASET or --synthetic N")
            root = _require(cfg.params["dataset"], "dataset")
            manifest = PreparationManifest.read(_require(root / MANIFEST_NAME, "dataset manifest"))
            pairs = [
                (LandmarkImage.load(root / face["landmarks"]), load_image(root / face["face"]))
                for _, face in manifest.face_entries()
                if face["has_landmarks"]
            ]
        out = Path(cfg.out)
        ckpt, trainlog = fit(pairs, gcfg, checkpoint_dir=out / "checkpoints")
        ckpt.metadata["config_hash"] = cfg.hash
        ckpt.save(out / "generator.lmck")
        trainlog.write_csv(out / "train_log.csv")
        return {"checkpoint": str(out / "generator.lmck"), "sha256": ckpt.sha256(), "pairs": len(pairs)}

    _execute("train", params, common, body)


@main.command()
@click.argument("source", type=click.Path())
@click.option("--checkpoint", type=click.Path(), required=False, help="Generator checkpoint (.lmck).")
@common_options
def anonymize(**kwargs) -> None:
    """Replace every face in SOURCE by a synthetic one.

    SOURCE is a prepared dataset (its stored landmark rasters are used) or a
    folder of face images (landmarks come from the landmarker adapter).
    """
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        from .gan import GanCheckpoint, Synthesizer, anonymize as anon
        from .imageops import GAN_NORMALIZATION, denormalize
        from .raster import LandmarkImage

        source = _require(cfg.params["source"], "source")
        if not cfg.params.get("checkpoint"):
            raise InvalidArgumentError("--checkpoint is required")
        synth = Synthesizer(GanCheckpoint.load(_require(cfg.params["checkpoint"], "checkpoint")))
        out = Path(cfg.out)
        (out / "images").mkdir(parents=True, exist_ok=True)
        items = _source_items(source)
        landmarker = None if (source / MANIFEST_NAME).exists() else _adapter(cfg, "landmarker")
        rows = []
        for ident, path, rec in items:
            if landmarker is None:
                raster = LandmarkImage.load(source / rec["face_entry"]["landmarks"])
                result = denormalize(synth.forward(raster), GAN_NORMALIZATION)
            else:
                result = anon(load_image(path), landmarker, synth)
            target = out / "images" / f"{ident}.png"
            save_image(result, target)
            rows.append((ident, path, target, "ours", rec.get("label")))
        pairs = _write_pairs(out, rows)
        return {"images": len(rows), "pairs": str(pairs)}

    _execute("anonymize", params, common, body)


@main.command()
@click.argument("method", type=click.Choice(["pixelate", "blur"]))
@click.argument("source", type=click.Path())
@click.option("-k", "--kernel", "k", type=int, required=True, help="Block or kernel size.")
@click.option(
    "--source-variant",
    "--source",
    "variant",
    type=click.Choice(["segmented", "raw"]),
    default="segmented",
    show_default=True,
    help="For prepared datasets: segmented faces or unmasked aligned crops.",
)
@common_options
def baseline(**kwargs) -> None:
    """Obfuscate faces with pixelation or Gaussian blur."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        method, k = cfg.params["method"], int(cfg.params["k"])
        op = pixelate if method == "pixelate" else blur
        source = _require(cfg.params["source"], "source")
        variant = "face" if cfg.params.get("variant", "segmented") == "segmented" else "crop"
        out = Path(cfg.out)
        (out / "images").mkdir(parents=True, exist_ok=True)
        tag = f"{method}-{k}"
        rows = []
        for ident, path, rec in _source_items(source, variant):
            result = op(load_image(path), k)
            target = out / "images" / f"{ident}.png"
            save_image(result, target)
            rows.append((ident, path, target, tag, rec.get("label")))
        pairs = _write_pairs(out, rows)
        return {"images": len(rows), "method": tag, "pairs": str(pairs)}

    _execute("baseline", params, common, body)


@main.group(name="eval")
def eval_group() -> None:
    """Evaluate anonymized images against their originals."""


def _pairs(cfg: RunConfig):
    from .eval import read_pairs_csv

    return read_pairs_csv(_require(cfg.params["pairs"], "pair list"))


def _finish_report(cfg: RunConfig, report) -> dict:
    report.metadata["config_hash"] = cfg.hash
    json_path, csv_path = report.write(cfg.out)
    result = {"report": str(json_path), "per_pair": str(csv_path)}
    if cfg.params.get("plot"):
        from .eval.plots import plot_report

        png = plot_report(report, Path(cfg.out) / f"{report.kind}.png")
        if png is not None:
            result["plot"] = str(png)
    return result


def _label_list(text: str | list | None) -> list[str] | None:
    if text is None or isinstance(text, list):
        return text
    return [s.strip() for s in text.split(",") if s.strip()]


_plot_option = click.option("--plot/--no-plot", default=None, help="Also write a PNG bar chart.")


@eval_group.command("anonymity")
@click.argument("pairs", type=click.Path())
@click.option("--threshold", type=float, help="Re-identification cosine-distance threshold.")
@_plot_option
@common_options
def eval_anonymity(**kwargs) -> None:
    """Cosine distance between original and anonymized face embeddings."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        from .eval import REIDENTIFICATION_THRESHOLD, anonymity_report

        report = anonymity_report(
            _pairs(cfg),
            _adapter(cfg, "embedder"),
            threshold=float(cfg.params.get("threshold", REIDENTIFICATION_THRESHOLD)),
        )
        return _finish_report(cfg, report)

    _execute("eval.anonymity", params, common, body)


@eval_group.command("emotion")
@click.argument("pairs", type=click.Path())
@click.option("--labels", help="Comma-separated emotion labels.")
@click.option("--dataset", type=click.Choice(["affectnet", "ck+", "faces"]), help="Use this dataset's label set.")
@click.option("--reference-method", "reference_method", help="Method compared against all others.")
@click.option("--subset", type=click.Choice(["all", "labelled"]), help="Pairs averaged per emotion.")
@_plot_option
@common_options
def eval_emotion(**kwargs) -> None:
    """Emotion class-probability distances with paired significance tests."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        from .eval import emotion_inference_report
        from .eval.references import EMOTIONS

        labels = _label_list(cfg.params.get("labels"))
        if not labels and cfg.params.get("dataset"):
            labels = EMOTIONS[cfg.params["dataset"]]
        if not labels:
            raise InvalidArgumentError("give --labels or --dataset")
        cfg.params["labels"] = labels
        report = emotion_inference_report(
            _pairs(cfg),
            _adapter(cfg, "classifier"),
            labels,
            reference_method=cfg.params.get("reference_method", "ours"),
            subset=cfg.params.get("subset", "all"),
        )
        return _finish_report(cfg, report)

    _execute("eval.emotion", params, common, body)


@eval_group.command("traits")
@click.argument("pairs", type=click.Path())
@click.option("--traits", help="Comma-separated trait names (default: the 40 CelebA attributes).")
@_plot_option
@common_options
def eval_traits(**kwargs) -> None:
    """Share of predicted facial traits removed by anonymization."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        from .eval import trait_report
        from .eval.references import CELEBA_TRAITS

        traits = _label_list(cfg.params.get("traits")) or list(CELEBA_TRAITS)
        cfg.params["labels"] = traits
        report = trait_report(_pairs(cfg), _adapter(cfg, "classifier"), traits)
        return _finish_report(cfg, report)

    _execute("eval.traits", params, common, body)


@eval_group.command("f1")
@click.argument("predictions", type=click.Path())
@click.option("--labels", help="Comma-separated class labels (default: all observed).")
@_plot_option
@common_options
def eval_f1(**kwargs) -> None:
    """Per-method F1 report from a CSV with method,y_true,y_pred columns."""
    params, common = _split(kwargs)

    def body(cfg: RunConfig) -> dict:
        import csv

        from .eval import training_f1_report

        path = _require(cfg.params["predictions"], "predictions file")
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        missing = {"method", "y_true", "y_pred"} - set(rows[0] if rows else {})
        if missing:
            raise InvalidArgumentError(f"predictions file lacks columns {sorted(missing)}")
        labels = _label_list(cfg.params.get("labels")) or sorted(
            {r["y_true"] for r in rows} | {r["y_pred"] for r in rows}
        )
        return _finish_report(cfg, training_f1_report(rows, labels))

    _execute("eval.f1", params, common, body)


if __name__ == "__main__":
    main()
