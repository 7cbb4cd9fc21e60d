"""Operation counting hook.

Primitives call :func:`charge`; whoever installed an accountant (normally
the transport, attributing work to the party currently running) receives
the count.  With no accountant installed the call is a no-op.
"""

from __future__ import annotations

import contextvars
from collections.abc import Callable
from contextlib import contextmanager

Accountant = Callable[[str, int], None]

_accountant: contextvars.ContextVar[Accountant | None] = contextvars.ContextVar("accountant", default=None)


def charge(op: str, amount: int = 1) -> None:
    acc = _accountant.get()
    if acc is not None:
        acc(op, amount)


@contextmanager
def accounting(acc: Accountant):
    token = _accountant.set(acc)
    try:
        yield
    finally:
        _accountant.reset(token)


# Per-operation CPU seconds used by the modeled clock.  Public-key and
# sharing costs are the microbenchmark figures published for ECIES/ECDSA on
# secp256k1 and XOR sharing (100-byte column, per byte for sharing).  The
# garbling and OT rates are this implementation's own order-of-magnitude
# figures.
MODELED_COST = {
    "encrypt": 491e-6,
    "decrypt": 491e-6,
    "sign": 692e-6,
    "verify": 555e-6,
    "share_bytes": 0.178e-6,
    "reconstruct_bytes": 0.306e-6,
    "garble_table_gates": 20e-6,
    "garble_free_gates": 1e-6,
    "eval_table_gates": 5e-6,
    "eval_free_gates": 0.5e-6,
    "base_ot": 1e-3,
    "ext_ot": 5e-6,
    "message": 50e-6,
}
