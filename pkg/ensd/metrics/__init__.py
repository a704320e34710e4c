from .alignment import *
from .wer import *
from .scoring import *
