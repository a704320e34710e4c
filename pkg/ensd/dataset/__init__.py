from .features import *
from .manifest import *
from .corpus import *
from .embedding import *
from .clustering import *
from .examples import *
