"""Random Schreier graphs of GL_k(F_q): construction, spectra, trace-method bounds."""

__version__ = "0.1.0"
