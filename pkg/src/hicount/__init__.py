"""hicount: hierarchical object counting on synthetic scenes.

A region proposal network finds candidate boxes; a tree of small
classifiers, grouped by how much a flat classifier confuses categories,
routes each box toward the queried category and the survivors are the
count. Everything runs on plain NumPy.
"""

__version__ = "0.1.0"
