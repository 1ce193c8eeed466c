"""qbcsim: desk-scale simulator for an entangled-pair bit commitment protocol.

The package splits along the protocol's own seams:

- qstate: two-qubit pure states, preparations, projective measurements.
- lincode: binary linear codes, masks, and the counting bounds.
- protocol: the commit/unveil state machine with an access-checked
  environment, plus the standalone detection-problem solvers.
- adversary: cheating strategies for both parties and the binding and
  concealment measurements built on them.
- harness: seeded batch/sweep execution with statistical gates and reports.
- cli: the `qbcsim` command (runs, sweeps, demo, code tools, verify).
- acceptance: the release-gate criteria behind `qbcsim verify`.
"""

from .protocol import ProtocolParams, RunResult, execute_run

__version__ = "0.1.0"

__all__ = ["ProtocolParams", "RunResult", "execute_run", "__version__"]
