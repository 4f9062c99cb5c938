"""Program compilation and the two evaluator backends.

``BACKEND`` names the evaluator in use: "compiled" when the Cython
extension imported, "python" otherwise (or when ``SYMOC_PURE=1``).
"""

from .program import BACKEND, Program, compile_program

__all__ = ["BACKEND", "Program", "compile_program"]
