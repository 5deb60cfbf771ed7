class NodeCapExceeded(RuntimeError):
    """Tree sampling produced more nodes than the configured cap."""


class StepCapExceeded(RuntimeError):
    """A chain or event loop ran past its step cap."""


class SpecError(ValueError):
    """Invalid model specification."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""
