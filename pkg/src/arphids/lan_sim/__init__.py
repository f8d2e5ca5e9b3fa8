"""Deterministic virtual-clock LAN for exercising the detector."""

from .scenario import (
    Direction, Expectation, HostPolicy, Injection, InvalidScenario, Scenario,
    ScenarioParseError, SimHost, dump_scenario, parse_scenario, parse_trace,
)
from .simulator import SimReport, check_expectations, expectation_met, run_scenario
from .cases import (
    HostAlreadyUp, UnknownCase, dos_flood, example_scenario, run_matrix,
    completeness_case, wake_host,
)
