"""Discrete-event simulation of multicomponent systems.

Event-driven scheduling, anticipatory data structures, the Poisson
dispenser, uniformized random sequential update and two parallel engines
(cautious advancement, synchronous relaxation), with five demonstration
models.
"""

__version__ = "0.1.0"
