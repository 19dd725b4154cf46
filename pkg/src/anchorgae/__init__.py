"""Anchor-based bipartite graph convolution clustering for plain feature-vector data.

Builds a k-sparse sample-to-anchor graph from a generative connectivity
model, trains a siamese graph-convolutional auto-encoder whose forward pass
is linear in the sample count, refines the graph self-supervisedly with an
anti-collapse sparsity schedule, and extracts cluster labels either by
k-means on the embedding or by SVD-based bipartite spectral clustering.

This file is intentionally import-light so the CLI can cap BLAS thread
pools before numpy is first loaded.
"""

__version__ = "0.1.0"
