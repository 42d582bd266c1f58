"""civi: compositional invariant checking for parameterized transition systems."""

__version__ = "0.1.0"

from .certificate import Certificate, certify  # noqa: E402
from .compose import compose, compose_all  # noqa: E402
from .contracts import (  # noqa: E402
    ActionContract,
    HybridContract,
    StateContract,
    check_inductive,
    lower,
    model_check_fulfillment,
)
from .errors import CiviError, SpecError  # noqa: E402
from .inference import generate_pool, houdini  # noqa: E402
from .loader import load_entry, load_files, load_text  # noqa: E402
from .model import ActionEvent, Component  # noqa: E402
from .rules import compose_contracts, prove  # noqa: E402
from .sfl import accepts, build_T, check_trace, validate_fluent  # noqa: E402
from .sorts import Instance  # noqa: E402

__all__ = [
    "ActionContract",
    "ActionEvent",
    "Certificate",
    "CiviError",
    "Component",
    "HybridContract",
    "Instance",
    "SpecError",
    "StateContract",
    "accepts",
    "build_T",
    "certify",
    "check_inductive",
    "check_trace",
    "compose",
    "compose_all",
    "compose_contracts",
    "generate_pool",
    "houdini",
    "load_entry",
    "load_files",
    "load_text",
    "lower",
    "model_check_fulfillment",
    "prove",
    "validate_fluent",
]
