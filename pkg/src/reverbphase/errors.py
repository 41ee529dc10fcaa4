class ConfigurationError(ValueError):
    """Incompatible settings: mismatched sample rates, non-invertible STFT, ..."""
