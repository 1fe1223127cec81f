"""Two-stage co-speech gesture generation over continuous motion latents.

Stage 1 (``mag.vae``) learns part-wise continuous motion latents aligned to
frozen audio/text embeddings; stage 2 (``mag.mmag``) generates those latents
with a masked autoregressive transformer and a per-token diffusion head.
``mag.metrics`` scores results, ``mag.synth`` builds the synthetic corpus,
and ``mag.cli`` exposes everything as the ``mag`` command."""

__version__ = "0.1.0"
