"""Graphon estimation, Gromov-Wasserstein transport and graphon-basis fitting for graph corpora."""
