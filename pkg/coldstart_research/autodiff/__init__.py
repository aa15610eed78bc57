from .tensor import Tensor, Tape, backward, as_tensor
from . import ops
from .params import ParamStore, SGD, Adam, make_optimizer, optimizer_step
from .gradcheck import grad_check, GradCheckReport
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, atomic_write_bytes
