"""Numerical core: autodiff tape, smoothing, recurrent cells, network, training and evaluation."""
