"""Cross-phase modulation in cold-atom gradient echo memory.

Simulates a four-level atomic ensemble through a full gradient-echo-memory
store/recall sequence with an AC-Stark signal pulse, extracts the imparted
phase shift and recall efficiency, and reproduces the saturation, detuning
and per-photon scaling of the measured nonlinearity.
"""

__version__ = "0.1.0"
