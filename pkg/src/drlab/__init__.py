"""Desk-scale deep reinforcement learning: tabular theory lab, numpy networks, agents, harness."""

__version__ = "0.1.0"
