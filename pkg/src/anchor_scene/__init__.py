"""anchor-scene: anchor-latent furniture codec and permutation-invariant scene generator."""

__version__ = "0.1.0"
