"""Command-line interface: ``latent-aspects <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
invariant failure.

Every command accepts ``--config FILE``: ``key = value`` lines, ``#``
comments, and optional ``[command]`` sections. Keys are option names
(``burn-in`` or ``burn_in``). Command-line flags override the file, which
overrides built-in defaults.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import evaluation, model_selection, sampler, synthetic
from ._util import atomic_write_text, dump_json
from .errors import DataError, InvariantError
from .similarity import Taxonomy

log = logging.getLogger("latent_aspects")

DEFAULT_FRACTIONS = ",".join(f"{i / 10:.1f}" for i in range(11))


def read_config(path) -> dict:
    """Parse a key=value config file into ``{section or '': {key: value}}``."""
    sections: dict[str, dict[str, str]] = {"": {}}
    current = ""
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise click.BadParameter(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        sections[current][key.replace("-", "_")] = value
    return sections


def _load_config(ctx, param, value):
    if value is None:
        return value
    try:
        sections = read_config(value)
    except OSError as exc:
        raise click.BadParameter(f"cannot read config: {exc}") from exc
    names = {p.name for p in ctx.command.params}
    defaults = {k: v for k, v in sections.get("", {}).items() if k in names}
    defaults.update({k: v for k, v in sections.get(ctx.info_name, {}).items() if k in names})
    ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return value


def _setup_logging(verbose: bool, quiet: bool):
    level = logging.INFO if verbose else logging.ERROR if quiet else logging.WARNING
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=level, force=True)


def common_options(f):
    f = click.option("--config", type=click.Path(dir_okay=False), callback=_load_config,
                     is_eager=True, expose_value=False, help="key=value config file.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True, help="Random seed.")(f)
    f = click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)(f)
    f = click.option("--verbose", "-v", is_flag=True)(f)
    f = click.option("--quiet", "-q", is_flag=True)(f)
    return f


def preprocess_options(f):
    f = click.option("--stopwords", type=click.Path(dir_okay=False),
                     help="Stopword file (default: bundled English list).")(f)
    f = click.option("--no-stopwords", is_flag=True, help="Disable stopword removal.")(f)
    f = click.option("--normalizer", type=click.Choice(["stem", "identity"]), default="stem", show_default=True)(f)
    return f


def _preprocess_config(stopwords, no_stopwords, normalizer, min_doc_freq=2, source=""):
    if no_stopwords:
        sw = frozenset()
    elif stopwords:
        try:
            sw = corpus_mod.load_stopwords(stopwords)
        except OSError as exc:
            raise DataError(f"cannot read stopword file: {exc}") from exc
    else:
        sw = corpus_mod.default_stopwords()
    norm = corpus_mod.light_stem if normalizer == "stem" else corpus_mod.identity
    return corpus_mod.PreprocessConfig(sw, min_doc_freq, norm, source)


@click.group()
def cli():
    """Latent aspect detection with an LDA aspect model."""


@cli.command()
@click.argument("input_path", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["lines", "table"]), default="lines", show_default=True)
@click.option("--delimiter", default=",", show_default=True, help="Delimiter for --format table.")
@click.option("--min-doc-freq", type=int, default=2, show_default=True)
@click.option("--out", "out_name", default="corpus.json", show_default=True)
@preprocess_options
@common_options
def preprocess(input_path, fmt, delimiter, min_doc_freq, out_name, stopwords, no_stopwords, normalizer,
               seed, out_dir, verbose, quiet):
    """Tokenize, filter and encode raw reviews into a corpus file."""
    _setup_logging(verbose, quiet)
    if min_doc_freq < 1:
        raise click.BadParameter("--min-doc-freq must be >= 1")
    try:
        ids, texts = corpus_mod.read_lines(input_path) if fmt == "lines" else corpus_mod.read_table(input_path, delimiter)
    except OSError as exc:
        raise DataError(f"cannot read {input_path}: {exc}") from exc
    config = _preprocess_config(stopwords, no_stopwords, normalizer, min_doc_freq, Path(input_path).name)
    corpus = corpus_mod.build_corpus(texts, config, ids)
    out = Path(out_dir) / out_name
    corpus.save(out)
    atomic_write_text(out.with_name(out.stem + "_report.json"), dump_json(corpus.report.to_dict()))
    log.info("wrote %s: %d reviews, %d words", out, len(corpus), len(corpus.vocabulary))


def train_options(f):
    f = click.option("--alpha", type=float, default=None, help="Document prior [default: 5/K].")(f)
    f = click.option("--beta", type=float, default=sampler.DEFAULT_BETA, show_default=True)(f)
    f = click.option("--iterations", type=int, default=sampler.DEFAULT_ITERATIONS, show_default=True)(f)
    f = click.option("--burn-in", type=int, default=sampler.DEFAULT_BURN_IN, show_default=True)(f)
    f = click.option("--sample-lag", type=int, default=sampler.DEFAULT_SAMPLE_LAG, show_default=True)(f)
    return f


@cli.command()
@click.argument("corpus_path", type=click.Path(dir_okay=False))
@click.option("-K", "--K", "K", type=int, default=30, show_default=True, help="Number of aspects.")
@click.option("--top-words", type=int, default=20, show_default=True)
@click.option("--out", "out_name", default="model.json", show_default=True)
@train_options
@common_options
def train(corpus_path, K, top_words, out_name, alpha, beta, iterations, burn_in, sample_lag,
          seed, out_dir, verbose, quiet):
    """Train an aspect model; writes the model file and a top-words CSV."""
    _setup_logging(verbose, quiet)
    corpus = corpus_mod.Corpus.load(corpus_path)
    try:
        model = sampler.train(corpus, K, alpha, beta, iterations, burn_in, sample_lag, seed)
    except ValueError as exc:
        if isinstance(exc, DataError):
            raise
        raise click.BadParameter(str(exc)) from exc
    out = Path(out_dir) / out_name
    model.save(out)
    atomic_write_text(out.with_name(out.stem + "_top_words.csv"), sampler.top_words_csv(model, top_words))
    log.info("wrote %s", out)


def _k_values(k_list, k_min, k_max, k_step):
    if k_list:
        return [int(x) for x in k_list.split(",") if x.strip()]
    if k_step < 1 or k_max < k_min:
        raise click.BadParameter("need k-step >= 1 and k-max >= k-min")
    return list(range(k_min, k_max + 1, k_step))


@cli.command("select-k")
@click.argument("corpus_path", type=click.Path(dir_okay=False))
@click.option("--k-min", type=int, default=5, show_default=True)
@click.option("--k-max", type=int, default=100, show_default=True)
@click.option("--k-step", type=int, default=5, show_default=True)
@click.option("--k-list", default=None, help="Comma-separated K values (overrides the range).")
@click.option("--top-m", type=int, default=model_selection.DEFAULT_TOP_M, show_default=True)
@click.option("--out", "out_name", default="coherence.csv", show_default=True)
@train_options
@common_options
def select_k(corpus_path, k_min, k_max, k_step, k_list, top_m, out_name, alpha, beta, iterations,
             burn_in, sample_lag, seed, out_dir, verbose, quiet):
    """Sweep K and write mean UMass coherence per K."""
    _setup_logging(verbose, quiet)
    ks = _k_values(k_list, k_min, k_max, k_step)
    if any(k < 2 for k in ks):
        raise click.BadParameter("every K must be >= 2")
    if top_m < 2:
        raise click.BadParameter("--top-m must be >= 2")
    corpus = corpus_mod.Corpus.load(corpus_path)
    kwargs = dict(beta=beta, iterations=iterations, burn_in=burn_in, sample_lag=sample_lag)
    if alpha is not None:
        kwargs["alpha"] = alpha
    results = model_selection.sweep_k(corpus, ks, seed=seed, top_m=top_m, **kwargs)
    model_selection.write_coherence_csv(results, Path(out_dir) / out_name)
    failed = [r.K for r in results if r.error]
    if failed:
        raise DataError(f"training failed for K in {failed}; see {out_name}")


@cli.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--text", default=None, help="Review text.")
@click.option("--file", "file_path", type=click.Path(dir_okay=False), default=None,
              help="File with one review per line.")
@click.option("--top-words", type=int, default=5, show_default=True)
@click.option("--fold-in-iterations", type=int, default=sampler.DEFAULT_FOLD_IN_ITERATIONS, show_default=True)
@click.option("--out", "out_name", default=None, help="Also write the output to this file in --out-dir.")
@preprocess_options
@common_options
def infer(model_path, text, file_path, top_words, fold_in_iterations, out_name, stopwords, no_stopwords,
          normalizer, seed, out_dir, verbose, quiet):
    """Rank a review's aspects, printing probability and top words per aspect."""
    _setup_logging(verbose, quiet)
    if (text is None) == (file_path is None):
        raise click.UsageError("give exactly one of --text or --file")
    model = sampler.AspectModel.load(model_path)
    config = _preprocess_config(stopwords, no_stopwords, normalizer)
    if text is not None:
        items = [("0", text)]
    else:
        try:
            items = list(zip(*corpus_mod.read_lines(file_path)))
        except OSError as exc:
            raise DataError(f"cannot read {file_path}: {exc}") from exc
    tops = model.top_words(top_words)
    lines = ["review_id\taspect_id\ttheta\ttop_words"]
    for rid, raw in items:
        review = corpus_mod.Review(model.vocabulary.encode(corpus_mod.preprocess(raw, config)), raw, rid)
        dist = sampler.fold_in(model, review, fold_in_iterations, seed)
        if dist.all_oov:
            lines.append(f"# review {rid}: no in-vocabulary tokens, aspect distribution is uniform")
        for a, p in dist.ranking():
            words = " ".join(model.vocabulary.words[w] for w, _ in tops[a])
            lines.append(f"{rid}\t{a}\t{p:.6f}\t{words}")
    output = "\n".join(lines) + "\n"
    click.echo(output, nl=False)
    if out_name:
        atomic_write_text(Path(out_dir) / out_name, output)


@cli.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.argument("semeval_paths", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--fractions", default=DEFAULT_FRACTIONS, show_default=True)
@click.option("--taxonomy", "taxonomy_path", type=click.Path(dir_okay=False), default=None)
@click.option("--taxonomy-smoothing", type=float, default=1.0, show_default=True)
@click.option("--top-k", type=int, default=5, show_default=True, help="Words per aspect used for matching.")
@click.option("--cutoff", type=int, default=5, show_default=True, help="Rank cutoff of the metrics.")
@click.option("--fold-in-iterations", type=int, default=sampler.DEFAULT_FOLD_IN_ITERATIONS, show_default=True)
@preprocess_options
@common_options
def evaluate(model_path, semeval_paths, fractions, taxonomy_path, taxonomy_smoothing, top_k, cutoff,
             fold_in_iterations, stopwords, no_stopwords, normalizer, seed, out_dir, verbose, quiet):
    """Masking sweep over SemEval files; one summary and one detail CSV per file."""
    _setup_logging(verbose, quiet)
    try:
        fr = [float(x) for x in fractions.split(",") if x.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"bad --fractions: {exc}") from exc
    if not fr or any(not 0 <= f <= 1 for f in fr):
        raise click.BadParameter("fractions must lie in [0, 1]")
    if top_k < 1 or cutoff < 1:
        raise click.BadParameter("--top-k and --cutoff must be >= 1")
    model = sampler.AspectModel.load(model_path)
    config = _preprocess_config(stopwords, no_stopwords, normalizer)
    taxonomy = None
    if taxonomy_path:
        try:
            taxonomy = Taxonomy.load(taxonomy_path, taxonomy_smoothing)
        except OSError as exc:
            raise DataError(f"cannot read taxonomy: {exc}") from exc
    for path in semeval_paths:
        testset = evaluation.load_semeval(path, config)
        reports = evaluation.sweep_masking(model, testset, fr, top_k, taxonomy, seed, cutoff, fold_in_iterations)
        stem = Path(path).stem
        evaluation.write_reports(reports, Path(out_dir) / f"{stem}_eval.csv", Path(out_dir) / f"{stem}_detail.csv")
        log.info("%s: %d reviews evaluated", path, reports[0].n_reviews)


@cli.command()
@click.option("-K", "--K", "K", type=int, default=4, show_default=True)
@click.option("-V", "--V", "V", type=int, default=40, show_default=True)
@click.option("--n-docs", type=int, default=500, show_default=True)
@click.option("--doc-len", type=int, default=40, show_default=True)
@click.option("--alpha", type=float, default=None, help="[default: 5/K]")
@click.option("--beta", type=float, default=sampler.DEFAULT_BETA, show_default=True)
@click.option("--mode", type=click.Choice(list(synthetic.MODES)), default=synthetic.PER_WORD, show_default=True)
@click.option("--disjoint", is_flag=True, help="Plant aspects uniform over disjoint word blocks.")
@common_options
def simulate(K, V, n_docs, doc_len, alpha, beta, mode, disjoint, seed, out_dir, verbose, quiet):
    """Sample a synthetic corpus plus its ground-truth manifest."""
    _setup_logging(verbose, quiet)
    if min(K, V, n_docs, doc_len) < 1:
        raise click.BadParameter("K, V, n-docs and doc-len must be positive")
    try:
        phi = synthetic.disjoint_phi(K, V) if disjoint else None
        corpus, truth = synthetic.generate(K, V, n_docs, doc_len, alpha or 5.0 / K, beta, mode, seed, phi)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    corpus.save(Path(out_dir) / "corpus.json")
    truth.save(Path(out_dir) / "ground_truth.json")


@cli.command("export-top-words")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--n", "n_words", type=int, default=20, show_default=True)
@click.option("--out", "out_name", default="top_words.csv", show_default=True)
@common_options
def export_top_words(model_path, n_words, out_name, seed, out_dir, verbose, quiet):
    """Write the top words of every aspect as CSV."""
    _setup_logging(verbose, quiet)
    model = sampler.AspectModel.load(model_path)
    atomic_write_text(Path(out_dir) / out_name, sampler.top_words_csv(model, n_words))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="latent-aspects", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except InvariantError as exc:
        click.echo(f"internal error: {exc}", err=True)
        return 3
    return 0


def run():
    sys.exit(main())
