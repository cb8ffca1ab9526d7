"""Exception hierarchy shared across modules.

``InputError`` subclasses are caller mistakes (bad files, bad flags, violated
preconditions) and map to CLI exit code 2. ``NonConvergence`` maps to 3.
"""


class LlglabError(Exception):
    pass


class InputError(LlglabError, ValueError):
    pass


class DegenerateSignals(InputError):
    pass


class SingularSystem(LlglabError, ValueError):
    pass


class KernelError(LlglabError, ValueError):
    pass


class NonConvergence(LlglabError, RuntimeError):
    pass
