class ConfigError(ValueError):
    """Invalid configuration, shapes, or arguments."""


class ContractError(RuntimeError):
    """A caller broke an operation's precondition in a way config checks cannot catch."""
