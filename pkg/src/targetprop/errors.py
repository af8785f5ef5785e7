"""Exception types shared across the package.

Each error carries a short machine-greppable ``code`` used by the CLI when
it reports a failure.
"""


class TargetPropError(Exception):
    code = "E_INTERNAL"


class DimensionError(TargetPropError, ValueError):
    code = "E_DIMENSION"


class ParameterError(TargetPropError, ValueError):
    code = "E_PARAMETER"


class ConfigError(TargetPropError, ValueError):
    code = "E_CONFIG"


class ContractError(TargetPropError, ValueError):
    code = "E_CONTRACT"


class FormatError(TargetPropError, ValueError):
    code = "E_FORMAT"
