"""Hex-rotor with a serial arm: variable-inertia dynamics, disturbance estimation
and H-infinity feedback-linearizing control, in simulation."""

from __future__ import annotations

__version__ = "0.1.0"
