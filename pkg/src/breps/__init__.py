"""Blockwise long-document retrieval engine.

Documents are segmented into short blocks, each block is embedded
independently, and a query scores a document through a weighted sum of
its top block similarities.  Subpackages cover tokenization,
segmentation, embedding backends, the binary representation store,
scoring, pairwise training, TREC-style evaluation, corpus I/O, and the
command-line interface.
"""

__version__ = "0.1.0"
