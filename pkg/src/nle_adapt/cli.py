"""``nle-adapt`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid config.
Failures print one ``error: kind=<Kind> message=<text>`` line on stderr.
Single-run commands use the stage seeds of run 0, so running
``generate``, ``train-source``, ``distill`` and ``adapt`` in sequence
reproduces run 0 of ``compare``.
"""

import json
import sys
from pathlib import Path

import click

from . import config as cfgmod
from . import nn, pipeline, report
from .codebook import METHODS as CODEBOOK_METHODS
from .codebook import Codebook
from .exceptions import ConfigError, NLEError
from .synth import Dataset, generate

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3


def _load_config(path):
    return cfgmod.load(path) if path else cfgmod.from_dict({})


def _seed(cfg, stage):
    return pipeline.stage_seed(cfg.master_seed, 0, stage)


def _with_seed(train_cfg, seed):
    return type(train_cfg)(**{**train_cfg.to_dict(), "seed": seed})


def _out(path, default):
    p = Path(path) if path else default
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                             help="Experiment config (JSON).")


@click.group()
def cli():
    """Label-embedding domain adaptation experiments."""


@cli.command("validate-config")
@config_option
@click.option("--dump", is_flag=True, help="Print the normalized config as JSON.")
def validate_config(config_path, dump):
    """Validate a config and report warnings."""
    cfg = _load_config(config_path)
    for w in cfgmod.validate(cfg):
        click.echo(f"warning: {w}", err=True)
    if dump:
        click.echo(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(f"ok config_hash={cfg.digest()}")


@cli.command("generate")
@config_option
@click.option("--out-dir", type=click.Path(file_okay=False), help="Overrides paths.data_dir.")
def generate_cmd(config_path, out_dir):
    """Draw source, target-adapt and target-test datasets."""
    cfg = _load_config(config_path)
    spec = cfg.domain_spec(_seed(cfg, "data"))
    out = Path(out_dir or cfg.data_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ds in generate(spec):
        ds.to_csv(out / f"{ds.domain_tag}.csv", spec)
        click.echo(f"wrote {out / (ds.domain_tag + '.csv')} ({len(ds)} frames)")


@cli.command("train-source")
@config_option
@click.option("--data", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
def train_source_cmd(config_path, data, out):
    """Train the source-domain classifier on one-hot labels."""
    cfg = _load_config(config_path)
    ds = Dataset.from_csv(data or cfg.path("data_dir") / "source.csv")
    net = pipeline.train_source(ds, _with_seed(cfg.source_train, _seed(cfg, "source")),
                                cfg.hidden, cfg.activation, cfg.domain_spec().num_classes)
    path = _out(out, cfg.path("model_dir") / "source.json")
    net.save(path)
    click.echo(f"wrote {path}")


@cli.command()
@config_option
@click.option("--method", type=click.Choice(CODEBOOK_METHODS), required=True)
@click.option("--model", type=click.Path(exists=True, dir_okay=False))
@click.option("--data", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
def distill(config_path, method, model, data, out):
    """Learn an l-vector codebook from the source model and data."""
    cfg = _load_config(config_path)
    net = nn.Network.load(model or cfg.path("model_dir") / "source.json")
    ds = Dataset.from_csv(data or cfg.path("data_dir") / "source.csv")
    cb = pipeline.distill(net, ds, method, _with_seed(cfg.centroid, _seed(cfg, "centroid")))
    path = _out(out, cfg.path("model_dir") / f"codebook_{method}.json")
    cb.save(path)
    missing = cb.missing()
    click.echo(f"wrote {path}" + (f" (uncovered classes: {missing})" if missing else ""))


@cli.command()
@config_option
@click.option("--codebook", "codebook_path", type=click.Path(exists=True, dir_okay=False),
              help="l-vector codebook; omit for one-hot retraining.")
@click.option("--model", type=click.Path(exists=True, dir_okay=False))
@click.option("--data", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--one-hot-uncovered", is_flag=True,
              help="Use floored one-hot targets for classes missing from the codebook.")
def adapt(config_path, codebook_path, model, data, out, one_hot_uncovered):
    """Adapt a copy of the source model to the target-domain data."""
    cfg = _load_config(config_path)
    net = nn.Network.load(model or cfg.path("model_dir") / "source.json")
    ds = Dataset.from_csv(data or cfg.path("data_dir") / "target_adapt.csv")
    train_cfg = _with_seed(cfg.adapt_train, _seed(cfg, "adapt"))
    if codebook_path:
        policy = "one_hot" if one_hot_uncovered else cfg.uncovered
        adapted = pipeline.adapt_nle(net, ds, Codebook.load(codebook_path), train_cfg, policy)
        name = "adapted_" + Path(codebook_path).stem.replace("codebook_", "nle_")
    else:
        adapted = pipeline.retrain_one_hot(net, ds, train_cfg)
        name = "adapted_one_hot"
    path = _out(out, cfg.path("model_dir") / f"{name}.json")
    adapted.save(path)
    click.echo(f"wrote {path}")


@cli.command()
@config_option
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report as JSON.")
def evaluate(config_path, model, data, out):
    """Error rate of a model on a dataset (default: target test set)."""
    cfg = _load_config(config_path)
    net = nn.Network.load(model)
    ds = Dataset.from_csv(data or cfg.path("data_dir") / "target_test.csv")
    rep = pipeline.evaluate(net, ds, Path(model).stem)
    if out:
        report.write_json([rep], _out(out, None), _provenance(cfg))
    click.echo(f"{rep.method} error_rate={rep.error_rate:.6f} ({rep.n_errors}/{rep.n_eval})")


@cli.command()
@config_option
@click.option("--methods", help="Comma-separated; overrides the config.")
@click.option("--num-seeds", type=int)
@click.option("--master-seed", type=int)
@click.option("--out-csv", type=click.Path(dir_okay=False))
@click.option("--out-json", type=click.Path(dir_okay=False))
@click.option("--timing/--no-timing", default=None, help="Fill wall_time_s in the CSV.")
def compare(config_path, methods, num_seeds, master_seed, out_csv, out_json, timing):
    """Run every method over several seeds and print the summary table."""
    cfg = _load_config(config_path)
    if methods is not None:
        cfg.methods = [m for m in methods.split(",") if m]
    if num_seeds is not None:
        cfg.num_seeds = num_seeds
    if master_seed is not None:
        cfg.master_seed = master_seed
    if timing is not None:
        cfg.timing_in_csv = timing
    cfgmod.validate(cfg)

    reports = pipeline.compare(cfg.methods, cfg.experiment())
    csv_path = _out(out_csv, cfg.path("report_dir") / "compare.csv")
    json_path = _out(out_json, cfg.path("report_dir") / "compare.json")
    report.write_csv(reports, csv_path, timing=cfg.timing_in_csv)
    report.write_json(reports, json_path, _provenance(cfg))
    if reports:
        table, summary_csv = report.render_summary(reports)
        csv_path.with_name(csv_path.stem + "_summary.csv").write_text(summary_csv)
        click.echo(table, nl=False)
    click.echo(f"wrote {csv_path} and {json_path}")


def _provenance(cfg):
    return {"git_describe": report.git_describe(Path(__file__).parent),
            "config_hash": cfg.digest(), "config": cfg.to_dict()}


def _fail(kind, message, code):
    one_line = " ".join(str(message).split())
    click.echo(f"error: kind={kind} message={one_line}", err=True)
    return code


def run_command(argv):
    """Run the CLI on ``argv`` and return the exit code instead of exiting."""
    try:
        cli.main(args=list(argv), prog_name="nle-adapt", standalone_mode=False)
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return _fail("UsageError", exc.format_message(), EXIT_USAGE)
    except click.exceptions.Abort:
        return _fail("Abort", "aborted", EXIT_RUNTIME)
    except click.ClickException as exc:
        return _fail(type(exc).__name__, exc.format_message(), EXIT_RUNTIME)
    except ConfigError as exc:
        return _fail("ConfigError", exc, EXIT_CONFIG)
    except (NLEError, OSError, ValueError) as exc:
        return _fail(type(exc).__name__, exc, EXIT_RUNTIME)
    return EXIT_OK


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
