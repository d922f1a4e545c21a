"""Exception hierarchy shared by every stage of the pipeline."""


class XbarError(Exception):
    """Base class for all errors raised by xbarmap."""


class ShapeError(XbarError, ValueError):
    """A layer geometry is impossible (filter larger than padded input, ...)."""


class ManifestError(XbarError, ValueError):
    """A network or weight manifest violates its schema."""


class WeightFileError(XbarError, ValueError):
    """The weight blob does not match its manifest or the network."""


class MappingError(XbarError):
    """A layer cannot be placed on the configured core geometry."""


class MissingSourceError(MappingError):
    """A core reads an axon whose source neuron was never produced."""

    def __init__(self, neuron, core_id):
        self.neuron = neuron
        self.core_id = core_id
        super().__init__(f"core {core_id}: no value for source neuron {neuron}")


class DimensionError(XbarError, ValueError):
    """Vector length does not match the crossbar it is applied to."""


class ConfigError(XbarError, ValueError):
    """Invalid simulation parameters."""
