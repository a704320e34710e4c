from .init_utils import *
from .log_utils import *
from .model_utils import *
from .train_utils import *
