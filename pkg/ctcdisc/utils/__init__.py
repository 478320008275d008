from . import amplitudes, csvout                       # mypy
from .amplitudes import *
from .csvout import *

__all__ = amplitudes.__all__ + csvout.__all__
