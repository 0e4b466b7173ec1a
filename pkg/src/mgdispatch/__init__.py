"""Economic dispatch of a combined heat and power microgrid whose CCGT heat
output follows an ARMA response, with a value-function policy and baselines."""

__version__ = '0.1.0'
