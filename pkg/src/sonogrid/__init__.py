"""Sonogrid: a software twin of an IoT urban noise-mapping deployment.

Simulated sensor nodes turn raw ADC sample blocks into calibrated
sound-pressure levels and publish them over HTTP to a self-hosted
real-time JSON tree store; a mapper service folds the store's change
events into a live interpolated dB heat grid and research exports.
"""

__version__ = "0.1.0"
