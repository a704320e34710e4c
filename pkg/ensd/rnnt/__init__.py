from .loss import *
from .oracle import *
from .multi_teacher import *
