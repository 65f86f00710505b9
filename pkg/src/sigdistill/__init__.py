"""Distillation of I/Q modulation-recognition datasets by distribution
matching in the time and frequency domains, plus the tooling around it:
a binary dataset container, a waveform generator, a small reverse-mode
autodiff engine, and a from-scratch evaluation harness."""

__version__ = "0.1.0"
