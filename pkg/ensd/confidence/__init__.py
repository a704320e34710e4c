from .nbest import *
