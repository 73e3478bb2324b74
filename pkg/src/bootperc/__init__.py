"""k-neighbour bootstrap percolation on trees and graphs."""

__version__ = "0.1.0"
