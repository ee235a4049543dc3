class InputError(Exception):
    """Bad input data or arguments; the CLI reports these and exits 1."""
