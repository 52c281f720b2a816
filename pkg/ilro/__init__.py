__version__: str = '0.3.0'

__all__ = ('__version__',)
