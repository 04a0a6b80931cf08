"""FLYSIG delay-insensitive dataflow processor: simulation and compilation."""
