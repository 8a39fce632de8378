"""Scenario-driven batch runner.

One scenario file drives one command; every run writes its artifacts plus a
manifest with per-output checksums.  All randomness is counter-based off the
scenario seed, so re-running with any worker count reproduces identical
bytes.

Commands: stability | tree | reconstruct | exp | borncheck
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dbb, finprob, scenario
from .errors import QfactError, ScenarioError
from .genesis import run_successions
from .hilbert import born_law, transform_between
from .probtree import CompatibilityGroup, partition_branches
from .reconstruct import RetrievalConfig, StateReconstructor, predict_heldout
from .seeding import trial_generator

CHUNK_TRIALS = 250_000  # rounded to a block multiple per law


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _hist_csv(hist: dbb.Histogram1D) -> str:
    rows = [(float(lo), float(hi), float(m))
            for lo, hi, m in zip(hist.edges[:-1], hist.edges[1:], hist.mass)]
    return _csv_text(["bin_low", "bin_high", "mass"], rows)


def _build_law_parallel(g, obs, n, eps, delta, n0, seed, base_offset, workers):
    """Deterministic chunked law construction: chunk boundaries depend only
    on n and the block size, never on the worker count."""
    chunk = n0 * max(1, CHUNK_TRIALS // n0)
    tasks = []
    off = 0
    while off < n:
        cnt = min(chunk, n - off)
        tasks.append((off, cnt))
        off += cnt

    def build(task):
        t_off, cnt = task
        return run_successions(g, obs, cnt, eps, delta, n0, seed,
                               trial_offset=base_offset + t_off)

    if workers <= 1 or len(tasks) == 1:
        partials = [build(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            partials = list(ex.map(build, tasks))
    law = partials[0]
    for part in partials[1:]:
        law = finprob.merge(law, part)
    return law


def _verdict_doc(law, verdict) -> dict:
    return {
        "stable": verdict.stable,
        "per_label_fraction_within_epsilon":
            verdict.per_label_fraction_within_epsilon,
        "worst_deviation": verdict.worst_deviation,
        "pooled_frequencies": verdict.pooled_frequencies,
        "epsilon": law.epsilon,
        "delta": law.delta,
        "block_size_n0": law.block_size_n0,
        "n_complete_blocks": len(law.complete_blocks()),
    }


# --------------------------------------------------------------------------
# commands: each returns {filename: text}
# --------------------------------------------------------------------------

def cmd_stability(scn: scenario.Scenario, workers: int) -> dict[str, str]:
    sect = scn.raw.get("stability")
    if not isinstance(sect, dict):
        raise ScenarioError("scenario has no 'stability' section")
    if "law" in sect:
        law = finprob.from_json_dict(sect["law"])
    elif "law_json" in sect:
        law = finprob.from_json(Path(sect["law_json"]).read_text())
    elif "sampling" in sect:
        rec = sect["sampling"]
        try:
            labels = list(rec["labels"])
            block_size = int(rec["block_size"])
            eps = float(rec.get("epsilon", finprob.DEFAULT_EPSILON))
            delta = float(rec.get("delta", finprob.DEFAULT_DELTA))
            segments = rec["segments"]
        except KeyError as exc:
            raise ScenarioError(f"stability.sampling: missing field {exc}") from None
        blocks = []
        block_index = 0
        for seg in segments:
            probs = np.asarray(seg["probs"], dtype=float)
            if probs.size != len(labels):
                raise ScenarioError("stability.sampling: probs/labels mismatch")
            for _ in range(int(seg["blocks"])):
                counts = trial_generator(scn.seed, block_index).multinomial(
                    block_size, probs / probs.sum())
                blocks.append({lab: int(c) for lab, c in zip(labels, counts) if c})
                block_index += 1
        law = finprob.FactualLaw.from_block_counts(labels, blocks, eps, delta,
                                                   block_size)
    else:
        raise ScenarioError("stability section needs 'law', 'law_json' or 'sampling'")
    verdict = finprob.check_convergence(law)
    return {
        "stability_verdict.json": _json_text(_verdict_doc(law, verdict)),
        "law.csv": finprob.to_csv(law),
    }


def cmd_tree(scn: scenario.Scenario, workers: int) -> dict[str, str]:
    if scn.generation is None:
        raise ScenarioError("tree command needs a 'generation' recipe")
    plan = scn.measurement_plan()
    observables = [scn.observable(name) for name in plan["observables"]]
    if plan["guided"]:
        groups = [CompatibilityGroup(tuple(o.name for o in observables))]
    else:
        groups = partition_branches(observables)

    outputs: dict[str, str] = {}
    law_files: dict[str, str] = {}
    verdicts: dict[str, dict] = {}
    for idx, obs in enumerate(observables):
        law = _build_law_parallel(scn.generation, obs, plan["n"],
                                  plan["epsilon"], plan["delta"],
                                  plan["block_size"], scn.seed,
                                  base_offset=idx * plan["n"], workers=workers)
        fname = f"law_{obs.name}.csv"
        outputs[fname] = finprob.to_csv(law)
        law_files[obs.name] = fname
        if len(law.complete_blocks()) >= 2:
            verdicts[obs.name] = _verdict_doc(law, finprob.check_convergence(law))
    tree_doc = {
        "trunk": scn.generation.id,
        "branches": [{"members": list(grp.members),
                      "laws": {m: law_files[m] for m in grp.members}}
                     for grp in groups],
        "trunk_only": len(groups) == 1,
        "mpc": [],
        "stability": verdicts,
    }
    outputs["tree.json"] = _json_text(tree_doc)
    return outputs


def _reconstruction_taus(scn: scenario.Scenario, reference: str, targets):
    taus = []
    for name in targets:
        try:
            taus.append(scn.transform(reference, name))
        except ScenarioError:
            taus.append(transform_between(scn.observable(reference),
                                          scn.observable(name)))
    return taus


def cmd_reconstruct(scn: scenario.Scenario, workers: int) -> dict[str, str]:
    sect = scn.raw.get("reconstruction")
    if not isinstance(sect, dict):
        raise ScenarioError("scenario has no 'reconstruction' section")
    if scn.generation is None:
        raise ScenarioError("reconstruct command needs a 'generation' recipe")
    try:
        reference = sect["reference"]
        partners = list(sect["partners"])
    except KeyError as exc:
        raise ScenarioError(f"reconstruction: missing field {exc}") from None
    heldout = list(sect.get("heldout", []))
    source = sect.get("source", "exact")
    restarts = int(sect.get("restarts", 32))

    from .genesis import resolve_state
    state = resolve_state(scn.generation)

    names = [reference] + partners
    laws: dict[str, object] = {}
    if source == "exact":
        for name in names:
            laws[name] = born_law(state, scn.observable(name))
        tol = float(sect.get("tol", 1e-10))
        cfg_kw = dict(tol=tol, stop_tol=min(tol * 1e-10, 1e-20))
    elif source == "sampled":
        plan = scn.measurement_plan()
        n = int(sect.get("n", plan["n"]))
        for idx, name in enumerate(names):
            laws[name] = _build_law_parallel(
                scn.generation, scn.observable(name), n, plan["epsilon"],
                plan["delta"], plan["block_size"], scn.seed,
                base_offset=idx * n, workers=workers)
        n_terms = sum(scn.observable(p).dim for p in partners)
        default_tol = RetrievalConfig.for_sampled_laws(n, n_terms).tol
        tol = float(sect.get("tol", default_tol))
        cfg_kw = dict(tol=tol, stop_tol=tol * 1e-6)
    else:
        raise ScenarioError(f"reconstruction source {source!r} unknown")

    taus = _reconstruction_taus(scn, reference, partners + heldout)
    est = StateReconstructor(reference=reference, restarts=restarts,
                             seed=scn.seed, **cfg_kw)
    est.fit(laws, taus)

    outputs = {
        "expansion.json": _json_text(est.expansion_.to_json_dict()),
        "retrieval_report.json": _json_text({
            "residual": est.report_.residual,
            "restarts_used": est.report_.restarts_used,
            "converged": est.report_.converged,
            "ambiguity_flag": est.report_.ambiguity_flag,
            "tolerance": tol,
            "source": source,
        }),
    }
    tau_by_target = {t.target: t for t in taus}
    for name in heldout:
        predicted = predict_heldout(est.expansion_, tau_by_target[name])
        obs = scn.observable(name)
        outputs[f"predicted_{name}.json"] = _json_text(
            {obs.label(k): float(p) for k, p in enumerate(predicted)})
    return outputs


def cmd_exp(scn: scenario.Scenario, workers: int) -> dict[str, str]:
    state = scenario.build_two_wave(scn.raw)
    cfg = scenario.build_exp_config(scn.raw)
    summary = dbb.simulate_exp(state, cfg, scn.seed)
    p1, p2 = summary.reference_spectrum
    doc = {
        "n_trials": summary.n_trials,
        "guided_p": [float(x) for x in summary.guided_p],
        "reference_spectrum": [[float(x) for x in p1], [float(x) for x in p2]],
        "mean_estimated_p": [float(x) for x in summary.mean_estimated_p],
        "sigma_px": summary.sigma_px,
        "sigma_z": summary.sigma_z,
        "heisenberg_product": summary.heisenberg_product,
        "hbar_half": summary.hbar_half,
        "heisenberg_violated": summary.heisenberg_product < summary.hbar_half,
        "phase_relation_conserved": summary.phase_relation_conserved,
        "lambda_table": [[float(l), float(g)] for l, g in summary.lambda_table],
    }
    return {
        "exp_summary.json": _json_text(doc),
        "exp_direction_hist.csv": _hist_csv(summary.direction_hist),
        "exp_fringe_hist.csv": _hist_csv(summary.fringe_hist),
        "exp_lambda_table.csv": _csv_text(
            ["lambda", "mean_abs_gamma"],
            [(float(l), float(g)) for l, g in summary.lambda_table]),
    }


def cmd_borncheck(scn: scenario.Scenario, workers: int) -> dict[str, str]:
    waves = scenario.build_plane_waves(scn.raw)
    sect = (scn.raw.get("dbb") or {}).get("borncheck") or {}
    n_samples = int(sect.get("n_samples", 10_000))
    bins = int(sect.get("bins", 64))
    rec = dbb.extended_born_check(waves, n_samples, scn.seed, bins=bins)
    vecs, wts = rec.candidate_spectrum
    doc = {
        "n_samples": rec.n_samples,
        "mean_guided_p": [float(x) for x in rec.mean_guided_p],
        "candidate_spectrum": [
            {"momentum": [float(x) for x in v], "weight": float(w)}
            for v, w in zip(vecs, wts)],
        "total_variation": rec.total_variation,
        "histogram_mass_total": rec.histogram_mass_total,
    }
    outputs = {"borncheck_summary.json": _json_text(doc)}
    for axis, hist in zip("xyz", rec.guided_hists):
        outputs[f"borncheck_p{axis}.csv"] = _hist_csv(hist)
    return outputs


COMMANDS = {
    "stability": cmd_stability,
    "tree": cmd_tree,
    "reconstruct": cmd_reconstruct,
    "exp": cmd_exp,
    "borncheck": cmd_borncheck,
}


def run_command(command: str, scenario_path: str, seed: int | None = None,
                out: str | None = None, workers: int = 1) -> Path:
    """Execute one pipeline; returns the output directory."""
    started = time.perf_counter()
    scn = scenario.load_scenario_file(scenario_path, seed)
    outputs = COMMANDS[command](scn, max(1, workers))

    out_dir = Path(out) if out is not None else Path(scn.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for name, text in sorted(outputs.items()):
        data = text.encode("utf-8")
        (out_dir / name).write_bytes(data)
        checksums[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "command": command,
        "scenario_hash": hashlib.sha256(
            Path(scenario_path).read_bytes()).hexdigest(),
        "seed": scn.seed,
        "outputs": checksums,
        "wall_clock_s": time.perf_counter() - started,
    }
    (out_dir / "manifest.json").write_text(_json_text(manifest))
    return out_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qfact",
        description="Scenario-driven runner for factual-law experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        out_dir = run_command(args.command, args.scenario, args.seed,
                              args.out, args.workers)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except QfactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
