"""epitown: an agent-based pandemic simulator for a small synthetic town.

Public surface: world building, the disease model, staged regulations with
testing and tracing, the day-loop engine, benchmark and learned policies,
analysis utilities, a CLI and an HTTP session service.
"""

__version__ = "0.1.0"
