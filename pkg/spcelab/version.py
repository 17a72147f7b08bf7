__version__ = "0.1.0"


def describe_version() -> str:
    """git-describe style version tag used in reports."""
    return f"v{__version__}"
