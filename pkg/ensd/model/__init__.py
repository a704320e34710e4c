from .autograd import *
from .transducer import *
from .weighter import *
from .decoding import *
from .checkpoint import *
