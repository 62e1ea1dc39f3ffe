"""Demand-response scheduling lab.

Simulates a household providing demand response as an MDP, trains a deep-Q
expert under a configurable true reward, and recovers an approximate reward
from the expert's behaviour with linear-programming inverse reinforcement
learning.
"""

__version__ = "0.1.0"
