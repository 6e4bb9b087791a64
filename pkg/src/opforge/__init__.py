"""Exact operadic calculus at finite truncation.

Modules: ``exact`` (rational linear algebra and homology), ``symseq``
(symmetric sequences), ``operads`` (operads, cooperads, Koszul data),
``modules`` (modules and bimodules), ``barcobar`` (coalgebras, Bar/Cobar,
Maurer-Cartan maps), ``defcplx`` (convolution and deformation complexes)
and ``cli``.
"""

__version__ = "0.1.0"
