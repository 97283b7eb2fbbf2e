"""Low-rank plus sparse reconstruction of dynamic complex images from
undersampled k-space: a classical iterative solver and a trainable
unrolled network."""

__version__ = "0.1.0"
