"""Batch front-end: one subcommand per computation, CSV or JSON-lines tables out.

Exit codes: 0 when every row certifies, 1 when some row fails its
certification or raised an error (see the failure manifest), 2 for
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import BoundInputs, bernoulli_source, gaussian_source, ordering_check, uniform_source
from .config import ConfigError, build_alphabet, build_spec, level_grid, load_config, validate
from .kraft import (REF_LABELS, BlockCode, BlockQuantizer, FSEncoder, build_code, run_campaign,
                    verify_lemma, verify_lemma5)
from .lz import (IndivBoundInputs, indiv_slb, lz78_code_length, lz78_parse, pair_quantizer,
                 parse_sequence, read_sequence, run_harness)
from .model import Alphabet, DistortionSpec, SLBError, hamming
from .phi import maxent_check, phi, phi_real_line
from .saddle import chernoff_log_volume, exact_volume, find_saddle, log_volume_saddle, monte_carlo_volume
from .sliding import gaussian_example_check, sliding_slb

COMMANDS = ("phi", "volume", "kraft", "slb", "sliding", "indiv")


class Table:
    """Rows plus the failures collected while producing them."""

    def __init__(self):
        self.rows: list[dict] = []
        self.failures: list[dict] = []

    def add(self, row: dict) -> None:
        self.rows.append(row)

    def fail(self, params: dict, exc: Exception) -> None:
        self.failures.append({"params": params, "error": f"{type(exc).__name__}: {exc}"})

    @property
    def ok(self) -> bool:
        return not self.failures and all(r.get("certified", True) for r in self.rows)


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    if isinstance(x, (tuple, list, np.ndarray)):
        return ";".join(fmt(v) for v in x)
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)) or x is None:
        return None if x is None else bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.12g}") if math.isfinite(x) else fmt(x)
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_json_value(v) for v in x]
    return str(x)


def render(rows: list[dict], form: str) -> str:
    if form == "json":
        return "".join(json.dumps({k: _json_value(v) for k, v in r.items()}) + "\n" for r in rows)
    header: list[str] = []
    for r in rows:
        header.extend(k for k in r if k not in header)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r.get(k)) for k in header])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _level_columns(D) -> dict:
    return {f"D{j + 1}": d for j, d in enumerate(D)}


def _resolve(cfg: dict, spec: DistortionSpec, D) -> tuple[Alphabet, object]:
    """Alphabet and Phi result; real-line alphabets are truncated per level."""
    block = cfg["alphabet"]
    if block["kind"] == "real_line":
        res, alphabet = phi_real_line(spec, D, block.get("nodes", 4001))
        return alphabet, res
    alphabet = build_alphabet(block)
    return alphabet, phi(alphabet, spec, D)


def _spec(cfg: dict) -> DistortionSpec:
    block = cfg["alphabet"]
    probe = build_alphabet(block) if block["kind"] != "real_line" else None
    return build_spec(cfg["distortion"], probe)


def cmd_phi(cfg: dict, seed: int, jobs: int) -> Table:
    table = Table()
    spec = _spec(cfg)
    for D in level_grid(cfg["D"], spec.k):
        try:
            alphabet, res = _resolve(cfg, spec, D)
            me = maxent_check(res, alphabet, spec, D)
        except SLBError as exc:
            table.fail(_level_columns(D), exc)
            continue
        table.add({"ref": "phi", **_level_columns(D), "phi_bits": res.phi,
                   **{f"beta{j + 1}": b for j, b in enumerate(res.beta_star)},
                   "active_mask": "".join("1" if a else "0" for a in res.active_mask),
                   "degenerate": res.degenerate, "boundary": res.boundary,
                   "maxent_residual": me.worst if me.applicable else None,
                   "certified": res.converged and (me.certified or not me.applicable)})
    return table


def _exact_label(spec: DistortionSpec, alphabet: Alphabet) -> str | None:
    if spec.k != 1:
        return None
    label = spec.functions[0].label
    if alphabet.is_discrete:
        return label if label == "hamming" and alphabet.nodes.tolist() == list(range(alphabet.size)) else None
    return label if label in ("abs", "square") and alphabet.real_line else None


def cmd_volume(cfg: dict, seed: int, jobs: int) -> Table:
    table = Table()
    spec = _spec(cfg)
    methods = cfg.get("methods", ["saddlepoint", "chernoff", "exact"])
    for D in level_grid(cfg["D"], spec.k):
        try:
            alphabet, res = _resolve(cfg, spec, D)
            saddle = find_saddle(alphabet, spec, D) if "saddlepoint" in methods else None
        except SLBError as exc:
            table.fail(_level_columns(D), exc)
            continue
        label = _exact_label(spec, alphabet)
        r = alphabet.size if alphabet.is_discrete else 2
        for n in cfg["n"]:
            exact = None
            if label:
                try:
                    exact = exact_volume(n, label, D[0], r).log_volume_bits
                except SLBError:
                    exact = None
            for method in methods:
                params = {**_level_columns(D), "n": n, "method": method}
                try:
                    if method == "saddlepoint":
                        est = log_volume_saddle(n, saddle, alphabet)
                    elif method == "chernoff":
                        est = chernoff_log_volume(n, res)
                    elif method == "exact":
                        if exact is None:
                            raise ConfigError(f"no closed-form volume for this distortion on n = {n}")
                        est = exact_volume(n, label, D[0], r)
                    else:
                        est = monte_carlo_volume(n, alphabet, spec, D, cfg.get("samples", 100_000), seed, jobs)
                except (SLBError, ConfigError) as exc:
                    table.fail(params, exc)
                    continue
                err = None if exact is None else est.log_volume_bits - exact
                certified = True
                if method == "chernoff" and exact is not None:
                    certified = err >= -1e-9
                if method == "monte-carlo":
                    certified = not est.zero_hits
                table.add({"ref": f"volume-{est.method}", **params, "log2_volume": est.log_volume_bits,
                           "exact": exact, "error": err, "ci95": est.ci95,
                           "prefactor_bits": est.prefactor_bits, "certified": certified})
    return table


def _kraft_row(report, **extra) -> dict:
    return {"ref": report.ref, **extra, **{k: v for k, v in report.params.items()},
            "z_value": report.z_value, "bound": report.bound, "slack": report.slack,
            "uncorrected_bound": report.uncorrected_bound, "uncorrected_slack": report.uncorrected_slack,
            "empty_output": report.empty_output, "certified": report.passed}


def _explicit_code(item: dict, alphabet: Alphabet, spec: DistortionSpec) -> BlockCode:
    n = item["n"]
    build = item["build"]
    kw = {"alphabet": alphabet, "n": n, "codebook": item.get("codebook"),
          "assignment": item.get("assignment"), "encode_spec": None if "assignment" in item else spec}
    if build == "explicit":
        if "class" not in item or "lengths" not in item or "codebook" not in item:
            raise ConfigError("explicit codes need class, codebook and lengths")
        return BlockCode(n, alphabet, item["codebook"], item["lengths"], item["class"], kw["assignment"],
                         kw["encode_spec"], item.get("rate"))
    if build == "d-semifaithful-cover":
        if "D" not in item:
            raise ConfigError("a cover needs a level D")
        return build_code(build, alphabet=alphabet, n=n, spec=spec, D=item["D"])
    return build_code(build, probabilities=item.get("probabilities"), rate=item.get("rate"), **kw)


def cmd_kraft(cfg: dict, seed: int, jobs: int) -> Table:
    table = Table()
    for camp in cfg.get("campaigns", []):
        lemma = camp["lemma"]
        for row in run_campaign(lemma, camp["trials"], seed, camp.get("r", 2), camp.get("max_n", 10), jobs):
            if row.report is None:
                table.failures.append({"params": {"lemma": lemma, "trial": row.trial, "seed": row.seed},
                                       "error": row.error})
            else:
                table.add(_kraft_row(row.report, source="campaign", trial=row.trial, seed=row.seed))
    for i, item in enumerate(cfg.get("codes", [])):
        alphabet = Alphabet.modular(item.get("r", 2))
        spec = DistortionSpec.single(hamming())
        try:
            code = _explicit_code(item, alphabet, spec)
            lemma = item.get("lemma") or ("semifaithful" if item["build"] == "d-semifaithful-cover" else code.kind)
            for alpha in item["alpha"]:
                for beta in item.get("beta", [0.0]):
                    rep = verify_lemma(code, alpha, beta, spec, D=item.get("D"), lemma=lemma, jobs=jobs)
                    table.add(_kraft_row(rep, source=f"code{i}", trial=i, seed=None))
        except (SLBError, ConfigError) as exc:
            table.fail({"code": i, "build": item["build"]}, exc)
    for i, item in enumerate(cfg.get("encoders", [])):
        try:
            enc = FSEncoder(item["output"], item["next_state"], item.get("initial", 0))
            r = item.get("r", enc.alphabet_size)
            q = item.get("quantizer")
            quant = BlockQuantizer(q["m"], r, q["codebook"], q["assignment"]) if q else BlockQuantizer.identity(r)
            alphabet = Alphabet.modular(r)
            spec = DistortionSpec.single(hamming())
            for alpha in item["alpha"]:
                for beta in item.get("beta", [0.0]):
                    rep = verify_lemma5(enc, quant, item["ell"], alpha, beta, spec, alphabet)
                    table.add(_kraft_row(rep, source=f"encoder{i}", trial=i, seed=None))
        except SLBError as exc:
            table.fail({"encoder": i, "ref": REF_LABELS["fs-encoder"]}, exc)
    return table


def _slb_inputs(src: dict, D, n: int) -> BoundInputs:
    kind = src["type"]
    if kind == "gaussian":
        return gaussian_source(src.get("sigma2", 1.0), D, n)
    if kind == "uniform":
        return uniform_source(src.get("lower", 0.0), src.get("upper", 1.0), D, n)
    if kind == "bernoulli":
        if "p" not in src:
            raise ConfigError("bernoulli source needs p")
        return bernoulli_source(src["p"], D, n)
    if not {"h_rate", "alphabet", "distortion"} <= src.keys():
        raise ConfigError("custom source needs h_rate, alphabet and distortion")
    if src["alphabet"]["kind"] == "real_line":
        spec = build_spec(src["distortion"], None)
        _, alphabet = phi_real_line(spec, D, src["alphabet"].get("nodes", 4001))
    else:
        alphabet = build_alphabet(src["alphabet"])
        spec = build_spec(src["distortion"], alphabet)
    return BoundInputs(src["h_rate"], n, alphabet, spec, D, "custom")


def cmd_slb(cfg: dict, seed: int, jobs: int) -> Table:
    table = Table()
    src = cfg["source"]
    k = len(src.get("distortion", [None]))
    for D in level_grid(cfg["D"], k):
        for n in cfg["n"]:
            params = {**_level_columns(D), "n": n}
            try:
                rep = ordering_check(_slb_inputs(src, D, n))
            except (SLBError, ConfigError) as exc:
                table.fail(params, exc)
                continue
            for e in rep.entries:
                table.add({"ref": e.refs, "source": rep.inputs.source, **params, "bound": e.name,
                           "value": e.value, "clamped": e.clamped, "redundancy": e.redundancy,
                           "alpha_star": e.extra.get("alpha_star"), "k_eff": e.extra.get("k_eff"),
                           "refinement_term": e.extra.get("refinement_term"),
                           "ordering_ok": rep.ordering_ok, "certified": rep.ordering_ok})
    return table


def cmd_sliding(cfg: dict, seed: int, jobs: int) -> Table:
    table = Table()
    if "alphabet" in cfg or "distortion" in cfg or "D" in cfg:
        if not {"alphabet", "distortion", "D"} <= cfg.keys():
            raise ConfigError("a sliding spec needs alphabet, distortion and D")
        if cfg["alphabet"]["kind"] == "real_line":
            raise ConfigError("sliding windows need an explicit interval or discrete alphabet")
        alphabet = build_alphabet(cfg["alphabet"])
        spec = build_spec(cfg["distortion"], alphabet)
        for D in level_grid(cfg["D"], spec.k):
            try:
                res = sliding_slb(alphabet, spec, D, cfg.get("h_rate"))
            except SLBError as exc:
                table.fail(_level_columns(D), exc)
                continue
            table.add({"ref": "slb-sliding", **_level_columns(D), "window": spec.window,
                       "bound": res.bound, "inf_value": res.inf_value, "beta_star": res.beta_star,
                       "log2_lambda": res.log2_lambda, "convexity_fallback": res.convexity_fallback,
                       "resolution_delta": res.resolution_delta, "edge_mass": res.edge_mass,
                       "under_resolved": res.under_resolved,
                       "certified": res.converged and not res.under_resolved})
    ex = cfg.get("gaussian_example")
    if ex:
        D = ex.get("D", 1.0)
        for theta in ex["theta"]:
            try:
                chk = gaussian_example_check(D, theta, ex.get("nodes"), ex.get("half_width", 10.0))
            except SLBError as exc:
                table.fail({"D1": D, "theta": theta}, exc)
                continue
            table.add({"ref": "slb-sliding-gaussian", "D1": D, "theta": theta,
                       "inf_value": chk.inf_value, "closed_form": chk.closed_form, "penalty": chk.penalty,
                       "closed_penalty": chk.closed_penalty, "residual": chk.residual,
                       "beta_star": chk.result.beta_star, "under_resolved": chk.result.under_resolved,
                       "certified": abs(chk.penalty - chk.closed_penalty) <= 1e-2})
    return table


def _sequence(item: dict, base: Path) -> tuple[list[int], list[str]]:
    if "file" in item:
        return read_sequence(base / item["file"])
    if "text" not in item:
        raise ConfigError("a sequence needs text or file")
    return parse_sequence(item.get("alphabet", ["0", "1"]), item["text"])


def cmd_indiv(cfg: dict, seed: int, jobs: int, base: Path = Path(".")) -> Table:
    table = Table()
    for i, item in enumerate(cfg.get("sequences", [])):
        try:
            u, symbols = _sequence(item, base)
            r = len(symbols)
            rep = item.get("reproduction", "identity")
            if rep == "identity":
                v = list(u)
            elif rep == "pair-quantizer":
                if r != 2 or len(u) % 2:
                    raise ConfigError("the pair quantizer needs a binary sequence of even length")
                v = pair_quantizer()(np.array(u)).tolist()
            else:
                v, _ = _sequence({**rep, "alphabet": symbols}, base)
            ell = item.get("ell", len(u))
            b = indiv_slb(IndivBoundInputs(u, v, ell, item.get("states", 1), item.get("l_max", 1.0),
                                           item.get("zeta"), item.get("delta"), r))
            parse = lz78_parse(u)
            lz_rate = lz78_code_length(lz78_parse(v).c, r) / len(v)
        except (SLBError, ConfigError) as exc:
            table.fail({"sequence": i}, exc)
            continue
        table.add({"ref": "slb-individual", "source": f"sequence{i}", "trial": i, "n": len(u), "ell": ell,
                   "c": parse.c, "phrases": ",".join("".join(symbols[x] for x in p) for p in parse.phrases),
                   "complexity": b.lz_term, "distortion": b.distortion, "phi_bits": b.phi_term,
                   "delta": b.delta_term, "bound": b.bound, "lz_rate": lz_rate,
                   "margin": lz_rate - b.bound, "certified": lz_rate >= b.bound})
    h = cfg.get("harness")
    if h is not None:
        for row in run_harness(h.get("trials", 100), seed, h.get("n", 8192), h.get("ell", 64)):
            table.add({"ref": "slb-individual", "source": "harness", "trial": row.trial, "n": row.n,
                       "ell": h.get("ell", 64), "c": row.c, "complexity": row.complexity,
                       "distortion": row.distortion, "phi_bits": row.terms.phi_term,
                       "delta": row.terms.delta_term, "bound": row.bound, "lz_rate": row.lz_rate,
                       "fs_rate": row.fs_rate, "margin": row.margin, "certified": row.margin >= 0})
    return table


HANDLERS = {"phi": cmd_phi, "volume": cmd_volume, "kraft": cmd_kraft, "slb": cmd_slb,
            "sliding": cmd_sliding, "indiv": cmd_indiv}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slbkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "") + " table")
        p.add_argument("--config", required=True, type=Path, help="YAML or JSON run configuration")
        p.add_argument("--out", type=Path, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, help="overrides the config seed (default 0)")
        p.add_argument("--jobs", type=int, default=1)
    return parser


def run(command: str, cfg: dict, seed: int = 0, jobs: int = 1, base: Path = Path(".")) -> Table:
    validate(command, cfg)
    if command == "indiv":
        return cmd_indiv(cfg, seed, jobs, base)
    return HANDLERS[command](cfg, seed, jobs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a mapping")
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        table = run(args.command, cfg, seed, args.jobs, args.config.parent)
    except ConfigError as exc:
        print(f"slbkit {args.command}: {exc}", file=sys.stderr)
        return 2
    except SLBError as exc:
        print(f"slbkit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = render(table.rows, args.format)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if table.failures:
        manifest = json.dumps({"command": args.command, "completed_rows": len(table.rows),
                               "failures": table.failures}, indent=2, sort_keys=True, default=_json_value)
        if args.out:
            args.out.with_name(args.out.name + ".failures.json").write_text(manifest + "\n")
        else:
            print(manifest, file=sys.stderr)
    return 0 if table.ok else 1


if __name__ == "__main__":
    sys.exit(main())
