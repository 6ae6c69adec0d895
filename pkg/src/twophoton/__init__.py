"""Two-photon quantum Rabi physics: circuit mapping, dressed-state master
equation, Floquet-Liouville steady states, fluorescence and photon statistics."""

__version__ = "0.1.0"
