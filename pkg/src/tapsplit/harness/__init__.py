"""Measurement harness: variants, workloads, reports, pricing, leakage and faults."""

from tapsplit.harness.cost import CostModel, dollar_cost
from tapsplit.harness.faults import FaultReport, inject_fault
from tapsplit.harness.leakage import LeakageDescriptor, leakage_of
from tapsplit.harness.runner import RunReport, run_variant
from tapsplit.harness.workloads import Workload, load_workload
from tapsplit.platform import VARIANTS, Variant, get_variant

__all__ = [
    "VARIANTS",
    "CostModel",
    "FaultReport",
    "LeakageDescriptor",
    "RunReport",
    "Variant",
    "Workload",
    "dollar_cost",
    "get_variant",
    "inject_fault",
    "leakage_of",
    "load_workload",
    "run_variant",
]
