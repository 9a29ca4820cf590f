"""t2ku: a semantic mathematics knowledge engine.

Pipeline: controlled-language propositions (t2math) are translated through
pattern rules (bridge) into frame-logic clauses (logic), proved or refuted
against the versioned knowledge base (kb) by the built-in engine (infer),
exported as TPTP problems (tptp), and brokered to external engines over the
REST heartbeat protocol (yard / server).
"""

__version__ = "0.1.0"

from .errors import T2kuError  # noqa: F401
