"""gridtalk: a dialogue-driven gridworld, its simulated user, and a
double-DQN agent that solves it through conversation alone."""

__version__ = "0.1.0"
