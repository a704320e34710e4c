from .workdir import *
from .experts import *
from .decode import *
from .weighter_training import *
from .fuse import *
from .student import *
from .report import *
from .evaluate import *
from .pipeline import *
from .tools import *
