class ConfigError(Exception):
    """A scenario or sweep configuration violates a constraint; the message names it"""
