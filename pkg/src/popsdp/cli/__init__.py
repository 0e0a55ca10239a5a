"""Text formats and the command line surface."""

from .main import DEMOS, main, run_demo, run_problem
from .popfile import PopDocument, PopSyntaxError, format_polynomial, parse_document, parse_pop, print_pop
from .sdpa import SdpaFormatError, format_sdpa, parse_sdpa, read_sdpa, write_sdpa

__all__ = [
    "DEMOS",
    "PopDocument",
    "PopSyntaxError",
    "SdpaFormatError",
    "format_polynomial",
    "format_sdpa",
    "main",
    "parse_document",
    "parse_pop",
    "parse_sdpa",
    "print_pop",
    "read_sdpa",
    "run_demo",
    "run_problem",
    "write_sdpa",
]
