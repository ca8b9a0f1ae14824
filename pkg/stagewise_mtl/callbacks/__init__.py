from .core import Callback, CallbacksHandler
from .logging import LoggingCallback
