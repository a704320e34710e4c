from .wtn import *
from .rover import *
