"""Process model, stationary solvers, approximation, checks and simulator."""
