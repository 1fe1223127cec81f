"""Ablation grid: stage-1 variants x fusion on/off, scored on one corpus.

Produces one table row per combination: reconstruction geodesic error for
stage 1 and, when stage 2 runs, Frechet distance / beat consistency /
diversity of clips regenerated from the corpus's own conditioning.
"""

from __future__ import annotations

import copy
from pathlib import Path

from . import metrics as metrics_mod
from .config import ExperimentConfig
from .features import pretrain_aligner
from .mmag import GestureGenerator, train_mmag
from .vae import reconstruction_geodesic, save_vae, train_vae

import numpy as np

STAGE1_VARIANTS = ("vq", "vae", "mt", "ma", "mta")


def generate_from_corpus(generator: GestureGenerator, corpus, n_clips: int,
                         seed: int, steps: int):
    """Regenerate clips conditioned on the first n_clips corpus triplets."""
    clips, audio = [], []
    for i, triplet in enumerate(corpus[:n_clips]):
        clip, _ = generator.generate(
            triplet.audio, triplet.transcript, triplet.speaker_id,
            triplet.motion.n_frames, steps, seed + i,
        )
        clips.append(clip)
        audio.append(triplet.audio)
    return clips, audio


def run_ablation(corpus, cfg: ExperimentConfig, out_dir, variants=None,
                 run_stage2: bool = True, n_eval: int = 32) -> list[dict]:
    variants = tuple(variants or STAGE1_VARIANTS)
    unknown = set(variants) - set(STAGE1_VARIANTS)
    if unknown:
        raise ValueError(f"unknown ablation variants: {sorted(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_eval = min(n_eval, len(corpus))

    aligner = None
    if any(v in ("mt", "ma", "mta") for v in variants):
        f = cfg.features
        aligner, _ = pretrain_aligner(
            corpus, epochs=f.aligner_epochs, seed=cfg.seed, d_align=f.d_align,
            d_hl=f.d_hl, d_text=f.d_text, batch_size=f.aligner_batch,
            lr=f.aligner_lr, tau=f.aligner_tau, held_out=f.aligner_held_out,
        )

    frames = np.stack([t.motion.frames for t in corpus])
    real_clips = [t.motion for t in corpus]
    table: list[dict] = []
    for variant in variants:
        stage1_cfg = copy.deepcopy(cfg)
        stage1_cfg.vae.variant = variant
        vae_result = train_vae(
            corpus, stage1_cfg, cfg.seed,
            aligner=aligner if variant in ("mt", "ma", "mta") else None,
        )
        save_vae(vae_result, out_dir / f"vae_{variant}.magp")
        rec = reconstruction_geodesic(vae_result.model, frames, vae_result.partition)
        if not run_stage2:
            table.append({"variant": variant, "hgat": None, "rec": rec})
            continue
        for hgat_on in (True, False):
            stage2_cfg = copy.deepcopy(stage1_cfg)
            stage2_cfg.hgat.enabled = hgat_on
            mmag_result = train_mmag(corpus, vae_result, stage2_cfg, cfg.seed)
            generator = GestureGenerator(
                vae=vae_result, mmag=mmag_result, cfg=stage2_cfg
            )
            gen_clips, audio = generate_from_corpus(
                generator, corpus, n_eval, cfg.seed, stage2_cfg.mmag.steps
            )
            report = metrics_mod.evaluate(
                real_clips, gen_clips, vae_result, audio_list=audio,
                bc_sigma=cfg.metrics.bc_sigma, shrinkage=cfg.metrics.shrinkage,
            )
            table.append(
                {
                    "variant": variant,
                    "hgat": "with" if hgat_on else "without",
                    "rec": rec,
                    "fgd": report.fgd,
                    "bc": report.bc,
                    "diversity": report.diversity,
                }
            )
    return table
