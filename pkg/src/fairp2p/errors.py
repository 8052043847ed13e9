"""Exception types shared across the package."""


class FairP2PError(Exception):
    pass


class MalformedChunk(FairP2PError, ValueError):
    pass


class EncodeFailure(FairP2PError, ValueError):
    """No curve point found for a value within the counter range."""


class DecodeError(FairP2PError, ValueError):
    pass


class InvalidTree(FairP2PError, ValueError):
    pass


class ScenarioError(FairP2PError, ValueError):
    """Scenario file does not satisfy the schema or session constraints."""
