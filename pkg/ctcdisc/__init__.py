"""
Multi-copy quantum state discrimination assisted by Deutschian closed
timelike curves.

The ctcdisc package contains:
 - dense linear algebra and the D-CTC channel with its fixed point iteration
 - construction and validation of the discrimination unitaries
 - the exact Markov chain analysis of the adaptive protocol
   (error probabilities, spectral error exponent, Chernoff benchmark)
 - a seeded Monte Carlo simulator of the protocol
 - a command line front end writing CSV tables

Released under the MIT License.
"""

__version_info__ = (26, 10, 17)
__version__ = '.'.join(str(n) for n in __version_info__)

from . import exceptions, qmath, quantum, synthesis, markov, simulate  # mypy
from .exceptions import *
from .quantum import *
from .synthesis import *
from .markov import *
from .simulate import *
# .cli and .config are not imported to ctcdisc

__all__ = [
    '__version__',
    '__version_info__',
    'qmath',
    *exceptions.__all__,
    *quantum.__all__,
    *synthesis.__all__,
    *markov.__all__,
    *simulate.__all__,
    ]
