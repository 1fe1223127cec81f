"""Command-line pipeline driver.

Grammar: ``mag <command> [--config path] [--set k=v]... [--seed n] [--out dir]``
plus per-command flags. Every command persists its effective config and a
run manifest (config hash, input hashes, output hashes), and ``mag replay``
re-executes a command from its manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import synth as synth_mod
from .config import ConfigError, ExperimentConfig
from .containers import ContainerFormatError
from .motion import load_clip, load_transcript
from .render import render_clip
from .vae import (
    TrainingDiverged,
    load_vae,
    reconstruction_geodesic,
    save_vae,
    train_vae,
    write_curves,
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for assignment in args.set or []:
        cfg.apply_override(assignment)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _finish_run(command: str, cfg: ExperimentConfig, out_dir: Path,
                cli_args: dict, inputs: list, outputs: list) -> int:
    """Validate declared outputs, then write config + run manifest."""
    missing = [str(p) for p in outputs if not Path(p).exists()]
    if missing:
        print(f"error: declared outputs missing: {missing}", file=sys.stderr)
        return 1
    cfg.save(out_dir / "config.json")
    manifest = {
        "command": command,
        "args": {k: str(v) for k, v in cli_args.items() if v is not None},
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {
            str(Path(p).relative_to(out_dir)): _sha256(Path(p)) for p in outputs
        },
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return 0


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if args.clips is not None:
        cfg.data.n_clips = args.clips
    out = _out_dir(cfg)
    triplets = synth_mod.synth_corpus(
        cfg.data.n_clips, cfg.data.n_frames, cfg.data.n_joints,
        cfg.data.n_speakers, cfg.seed, fps=cfg.data.fps,
        beat_period=cfg.data.beat_period,
    )
    manifest_path = synth_mod.write_corpus(triplets, out)
    outputs = [manifest_path]
    for entry in json.loads(manifest_path.read_text())["triplets"]:
        outputs.extend(out / entry[k] for k in ("clip", "audio", "transcript"))
        load_clip(out / entry["clip"])  # validate what we wrote
    return _finish_run("synth", cfg, out, {"clips": args.clips}, [], outputs)


def cmd_pretrain_aligner(args) -> int:
    from .features import pretrain_aligner, save_aligner

    cfg = _load_config(args)
    out = _out_dir(cfg)
    corpus = synth_mod.load_corpus(args.corpus)
    f = cfg.features
    aligner, history = pretrain_aligner(
        corpus, epochs=f.aligner_epochs, seed=cfg.seed, d_align=f.d_align,
        d_hl=f.d_hl, d_text=f.d_text, batch_size=f.aligner_batch,
        lr=f.aligner_lr, tau=f.aligner_tau, held_out=f.aligner_held_out,
    )
    aligner_path = out / "aligner.magp"
    save_aligner(aligner, aligner_path)
    history_path = out / "aligner_history.json"
    history_path.write_text(json.dumps(history, indent=2, sort_keys=True))
    return _finish_run(
        "pretrain-aligner", cfg, out, {"corpus": args.corpus},
        [Path(args.corpus) if Path(args.corpus).is_file() else Path(args.corpus) / "manifest.json"],
        [aligner_path, history_path],
    )


def cmd_train_vae(args) -> int:
    from .features import load_aligner

    cfg = _load_config(args)
    if args.variant:
        cfg.vae.variant = args.variant
    out = _out_dir(cfg)
    corpus = synth_mod.load_corpus(args.corpus)
    aligner = load_aligner(args.aligner) if args.aligner else None
    try:
        result = train_vae(corpus, cfg, cfg.seed, aligner=aligner)
    except TrainingDiverged as err:
        _dump_diverged(err, out)
        print(f"error: {err} (last-good checkpoint written)", file=sys.stderr)
        return 3
    vae_path = out / "vae.magp"
    save_vae(result, vae_path)
    curves_path = out / "vae_curves.jsonl"
    write_curves(result.curves, curves_path)
    inputs = [_corpus_manifest(args.corpus)]
    if args.aligner:
        inputs.append(Path(args.aligner))
    return _finish_run(
        "train-vae", cfg, out,
        {"corpus": args.corpus, "aligner": args.aligner, "variant": args.variant},
        inputs, [vae_path, curves_path],
    )


def cmd_train_mmag(args) -> int:
    from .mmag import save_mmag, train_mmag

    cfg = _load_config(args)
    out = _out_dir(cfg)
    corpus = synth_mod.load_corpus(args.corpus)
    vae_result = load_vae(args.vae)
    try:
        result = train_mmag(corpus, vae_result, cfg, cfg.seed)
    except TrainingDiverged as err:
        _dump_diverged(err, out)
        print(f"error: {err} (last-good checkpoint written)", file=sys.stderr)
        return 3
    mmag_path = out / "mmag.magp"
    save_mmag(result, cfg, mmag_path)
    curves_path = out / "mmag_curves.jsonl"
    write_curves(result.curves, curves_path)
    return _finish_run(
        "train-mmag", cfg, out, {"corpus": args.corpus, "vae": args.vae},
        [_corpus_manifest(args.corpus), Path(args.vae)],
        [mmag_path, curves_path],
    )


def cmd_generate(args) -> int:
    from .mmag import GestureGenerator, load_mmag

    cfg = _load_config(args)
    out = _out_dir(cfg)
    vae_result = load_vae(args.vae)
    mmag_result = load_mmag(args.mmag, cfg, vae_result.fps)
    audio = synth_mod.load_wav(args.audio)
    transcript = load_transcript(args.transcript) if args.transcript else ()
    generator = GestureGenerator(vae=vae_result, mmag=mmag_result, cfg=cfg)
    n_frames = args.frames or cfg.data.n_frames
    steps = args.steps or cfg.mmag.steps
    outputs = []
    for i in range(args.count):
        clip, _ = generator.generate(
            audio, transcript, args.speaker, n_frames, steps, cfg.seed + i
        )
        clip_path = out / f"gen_{i:05d}.magm"
        from .motion import save_clip

        save_clip(clip, clip_path)
        gen_manifest = {
            "audio": str(args.audio),
            "transcript": str(args.transcript) if args.transcript else None,
            "speaker_id": args.speaker,
            "seed": cfg.seed + i,
            "S": steps,
            "N_diff": mmag_result.schedule.n_steps,
            "out_clip": clip_path.name,
        }
        gen_path = out / f"gen_{i:05d}.json"
        gen_path.write_text(json.dumps(gen_manifest, indent=2, sort_keys=True))
        outputs.extend([clip_path, gen_path])
    return _finish_run(
        "generate", cfg, out,
        {
            "vae": args.vae, "mmag": args.mmag, "audio": args.audio,
            "transcript": args.transcript, "speaker": args.speaker,
            "frames": n_frames, "steps": steps, "count": args.count,
        },
        [Path(args.vae), Path(args.mmag), Path(args.audio)],
        outputs,
    )


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    vae_result = load_vae(args.vae)
    real = [t.motion for t in synth_mod.load_corpus(args.real)]
    gen_dir = Path(args.gen)
    gen_clips, audio_list = [], []
    manifests = sorted(gen_dir.glob("gen_*.json"))
    if manifests:
        for m in manifests:
            payload = json.loads(m.read_text())
            gen_clips.append(load_clip(gen_dir / payload["out_clip"]))
            audio_list.append(synth_mod.load_wav(payload["audio"]))
    else:
        for p in sorted(gen_dir.glob("*.magm")):
            gen_clips.append(load_clip(p))
        audio_list = None
    if not gen_clips:
        print(f"error: no generated clips found under {gen_dir}", file=sys.stderr)
        return 2
    report = metrics_mod.evaluate(
        real, gen_clips, vae_result, audio_list=audio_list,
        bc_sigma=cfg.metrics.bc_sigma, shrinkage=cfg.metrics.shrinkage,
        config=cfg.to_dict(),
    )
    report_path = out / "metrics.json"
    report.save(report_path)
    print(
        f"fgd={report.fgd:.6f} bc={report.bc:.6f} diversity={report.diversity:.6f}"
    )
    return _finish_run(
        "evaluate", cfg, out, {"real": args.real, "gen": args.gen, "vae": args.vae},
        [_corpus_manifest(args.real), Path(args.vae)], [report_path],
    )


def cmd_ablate(args) -> int:
    from .ablation import run_ablation

    cfg = _load_config(args)
    out = _out_dir(cfg)
    corpus = synth_mod.load_corpus(args.corpus)
    variants = args.variants.split(",") if args.variants else None
    table = run_ablation(
        corpus, cfg, out, variants=variants, run_stage2=not args.skip_stage2
    )
    table_json = out / "ablation_table.json"
    table_json.write_text(json.dumps(table, indent=2, sort_keys=True))
    table_txt = out / "ablation_table.txt"
    table_txt.write_text(_format_table(table))
    print(table_txt.read_text())
    return _finish_run(
        "ablate", cfg, out,
        {"corpus": args.corpus, "variants": args.variants,
         "skip_stage2": args.skip_stage2},
        [_corpus_manifest(args.corpus)], [table_json, table_txt],
    )


def cmd_render(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    clip = load_clip(args.clip)
    result = render_clip(clip, out)
    outputs = [Path(p) for p in result["pngs"]] + [Path(result["csv"])]
    return _finish_run(
        "render", cfg, out, {"clip": args.clip}, [Path(args.clip)], outputs
    )


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    command = manifest["command"]
    cfg_payload = manifest["config"]
    if args.out:
        cfg_payload = dict(cfg_payload, out_dir=args.out)
    tmp_cfg = Path(args.out or cfg_payload["out_dir"])
    tmp_cfg.mkdir(parents=True, exist_ok=True)
    cfg_file = tmp_cfg / "_replay_config.json"
    cfg_file.write_text(json.dumps(cfg_payload, indent=2, sort_keys=True))
    argv = [command, "--config", str(cfg_file)]
    for key, value in manifest.get("args", {}).items():
        if value is None or value == "None":
            continue
        flag = "--" + key.replace("_", "-")
        if value == "True":
            argv.append(flag)
        elif value == "False":
            continue
        else:
            argv.extend([flag, value])
    return main(argv)


def _corpus_manifest(path_str: str) -> Path:
    p = Path(path_str)
    return p if p.is_file() else p / "manifest.json"


def _dump_diverged(err: TrainingDiverged, out: Path) -> None:
    import torch

    from . import containers

    tensors = {k: v.detach().numpy() for k, v in err.last_good_state.items()
               if isinstance(v, torch.Tensor)}
    containers.save_tensors(out / "last_good.magp", tensors)


def _format_table(table: list[dict]) -> str:
    cols = ["variant", "hgat", "rec", "fgd", "bc", "diversity"]
    widths = {c: max(len(c), 10) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for row in table:
        cells = []
        for c in cols:
            v = row.get(c)
            if isinstance(v, float):
                cells.append(f"{v:.4f}".ljust(widths[c]))
            else:
                cells.append(str(v if v is not None else "-").ljust(widths[c]))
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def _add_common(sub):
    sub.add_argument("--config", help="experiment config JSON")
    sub.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override one config value")
    sub.add_argument("--seed", type=int, help="override config seed")
    sub.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mag",
        description="Two-stage co-speech gesture generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    _add_common(p)
    p.add_argument("--clips", type=int, help="number of clips")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain-aligner", help="train the frozen audio/text aligner")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_pretrain_aligner)

    p = sub.add_parser("train-vae", help="train stage 1 (motion VAE or VQ baseline)")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--aligner", help="aligner checkpoint (needed for mt/ma/mta)")
    p.add_argument("--variant", choices=["vae", "mt", "ma", "mta", "vq"])
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("train-mmag", help="train stage 2 (masked AR diffusion)")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vae", required=True, help="stage-1 checkpoint")
    p.set_defaults(func=cmd_train_mmag)

    p = sub.add_parser("generate", help="generate gesture clips from audio + text")
    _add_common(p)
    p.add_argument("--vae", required=True)
    p.add_argument("--mmag", required=True)
    p.add_argument("--audio", required=True, help="16 kHz mono WAV")
    p.add_argument("--transcript", help="transcript JSON")
    p.add_argument("--speaker", type=int, default=0)
    p.add_argument("--frames", type=int, help="frames to generate")
    p.add_argument("--steps", type=int, help="unmasking steps")
    p.add_argument("--count", type=int, default=1, help="clips to generate")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated clips against a corpus")
    _add_common(p)
    p.add_argument("--real", required=True, help="corpus dir or manifest")
    p.add_argument("--gen", required=True, help="directory of generated clips")
    p.add_argument("--vae", required=True, help="stage-1 checkpoint (feature extractor)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run the variant x fusion ablation grid")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--variants", help="comma list from vq,vae,mt,ma,mta")
    p.add_argument("--skip-stage2", action="store_true",
                   help="stage-1 reconstruction comparison only")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render", help="render a clip to stick-figure PNGs + CSV")
    _add_common(p)
    p.add_argument("--clip", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("replay", help="re-execute a command from its run manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="redirect outputs")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContainerFormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: missing input: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
