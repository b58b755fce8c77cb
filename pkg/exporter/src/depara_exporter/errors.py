class ExportError(ValueError):
    """Invalid export specification, model reference, or probe data."""
