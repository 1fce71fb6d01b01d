"""Exception hierarchy shared by every layer of the package."""


class RingdotError(Exception):
    """Base class for all package errors."""


class ParameterError(RingdotError, ValueError):
    """A numeric parameter is outside the supported domain."""


class RangeError(ParameterError):
    """A plaintext, scalar or trust value is outside its admissible range."""


class KeyMismatchError(RingdotError):
    """Ciphertexts or keys from different key pairs were combined."""


class KeyGenerationError(RingdotError):
    """Key generation could not satisfy the requested constraints."""


class AlgebraError(RingdotError):
    """Trust pairs from different rings were combined."""


class ConfigurationError(RingdotError, ValueError):
    """A network, chain or scenario is inconsistent."""


class RoutingError(RingdotError):
    """A message names a player that is not registered in the network."""


class HypothesisError(RingdotError):
    """A protocol precondition on bounds or moduli does not hold."""


class ProtocolAbort(RingdotError):
    """An honest player stopped the protocol after a failed check.

    ``player`` is the aborting player index and ``step`` the protocol step
    label at which the check failed.
    """

    def __init__(self, player, step, reason, context=None):
        self.player = player
        self.step = step
        self.reason = reason
        self.context = dict(context or {})
        where = f" [{', '.join(f'{k}={v}' for k, v in self.context.items())}]" if self.context else ""
        super().__init__(f"P{player} aborted at {step}: {reason}{where}")

    def with_context(self, **context):
        merged = {**context, **self.context}
        return ProtocolAbort(self.player, self.step, self.reason, merged)
