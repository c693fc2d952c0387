class OntoflowError(Exception):
    """Base class for every error raised by the package."""
