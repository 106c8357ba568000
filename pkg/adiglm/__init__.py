__version__ = "1.0.0"
from .interface import AdiExperiment
from .methods import MethodId, get_method, get_method_by_order
from .tableau import AdiMethod, PartitionLayout, assemble_adi
