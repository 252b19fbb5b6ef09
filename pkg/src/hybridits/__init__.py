"""Hybrid cooperative-ITS communication with privacy enforcement.

Field devices, a systems network and service backends exchange signed,
pseudonymous messages over cellular, ITS-G5, DAB and RFID. Start with
:func:`hybridits.sim.run_scenario` or the ``hybridits`` command.
"""

__version__ = "0.1.0"
