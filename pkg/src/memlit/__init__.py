"""memlit: a workbench for litmus tests under axiomatic memory models.

Parses small concurrent programs, enumerates their pre-traces and
candidate executions, checks consistency against relational memory
models, and decides whether program-transformation effects are safe.
"""

__version__ = "0.1.0"
