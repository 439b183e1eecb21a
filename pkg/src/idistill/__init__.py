"""Morphing attack detection with distilled identity vectors.

Two networks cooperate: a convolutional autoencoder learns an identity
prior from bonafide faces, and a dual-vector classifier is trained to
separate the identities fused in a morph, with a cosine-angle distillation
term tying its vectors to the autoencoder's latent space.  The package
also ships a deterministic synthetic dataset generator, the biometric
evaluation harness (EER / APCER / BPCER / DET), a FastAPI service and a
thin CLI client.
"""

__version__ = "0.1.0"

LATENT_DIM = 128
