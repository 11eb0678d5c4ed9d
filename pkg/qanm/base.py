from config import Config
from utils.logger import SimLogger


class SimComponent:
    """Base class that all stateful simulator components inherit from"""

    def __init__(self):
        self.config = Config()
        self.logger = SimLogger.get_run_logger(self.__class__.__name__)

    def fail(self, message: str, error: Exception):
        """Log an error and raise it"""
        SimLogger.log_error(message, error, self.__class__.__name__)
        raise error

    def check(self, description: str, holds: bool, error: Exception):
        """Log a runtime check and raise error when it does not hold"""
        SimLogger.log_check(description, holds, self.__class__.__name__)
        if not holds:
            raise error
