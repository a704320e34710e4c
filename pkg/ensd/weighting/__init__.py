from .policies import *
from .bce import *
