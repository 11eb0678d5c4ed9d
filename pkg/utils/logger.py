import logging
import os
from pathlib import Path
import colorlog
from config import Config


ROOT_LOGGER = "qanm"


class SimLogger:
    """Logging utility shared by the simulator components"""

    def __init__(self, name=ROOT_LOGGER):
        self.config = Config()
        self.logger = logging.getLogger(name)
        self.setup_logger()

    def setup_logger(self):
        """Set up the qanm root logger with file and console handlers"""
        # Handlers live on the root only; qanm.<component> loggers propagate to it
        root = logging.getLogger(ROOT_LOGGER)
        if getattr(root, '_qanm_configured', False):
            return
        root.handlers.clear()

        # Set log level
        log_level = getattr(logging, self.config.LOG_LEVEL, logging.INFO)
        root.setLevel(log_level)

        # File handler with detailed formatting
        if self.config.LOG_TO_FILE:
            log_dir = Path(self.config.LOG_FILE_PATH).parent
            log_dir.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(self.config.LOG_FILE_PATH, mode='a', encoding='utf-8')
            file_formatter = logging.Formatter(
                '%(asctime)s | %(name)s | %(levelname)-8s | %(funcName)s:%(lineno)d | %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            )
            file_handler.setFormatter(file_formatter)
            file_handler.setLevel(log_level)
            root.addHandler(file_handler)

        # Console handler with colors
        if self.config.LOG_TO_CONSOLE:
            console_handler = colorlog.StreamHandler()
            console_formatter = colorlog.ColoredFormatter(
                '%(log_color)s%(asctime)s | %(levelname)-8s | %(name)s | %(message)s%(reset)s',
                datefmt='%H:%M:%S',
                log_colors={
                    'DEBUG': 'cyan',
                    'INFO': 'green',
                    'WARNING': 'yellow',
                    'ERROR': 'red',
                    'CRITICAL': 'red,bg_white',
                }
            )
            console_handler.setFormatter(console_formatter)
            console_handler.setLevel(log_level)
            root.addHandler(console_handler)

        root._qanm_configured = True

    def get_logger(self):
        """Get the configured logger instance"""
        return self.logger

    @staticmethod
    def get_run_logger(component: str = None):
        """Get a logger for a component or a named run"""
        if component:
            logger_name = f"{ROOT_LOGGER}.{component}"
        else:
            logger_name = ROOT_LOGGER
        return SimLogger(logger_name).get_logger()

    @staticmethod
    def log_start(name: str, **kwargs):
        """Log the start of a run with its parameters"""
        logger = SimLogger.get_run_logger(name)
        logger.info(f"🚀 Starting: {name}")

        for key, value in kwargs.items():
            logger.info(f"   {key}: {value}")

    @staticmethod
    def log_end(name: str, status: str, duration: float = None):
        """Log the end of a run with its outcome"""
        logger = SimLogger.get_run_logger(name)

        status_icon = {
            'PASSED': '✅',
            'DONE': '✅',
            'FAILED': '❌',
            'SKIPPED': '⏭️',
            'ERROR': '💥'
        }.get(status.upper(), '❓')

        message = f"{status_icon} {status.lower()}: {name}"
        if duration:
            message += f" (Duration: {duration:.2f}s)"

        if status.upper() in ['PASSED', 'DONE', 'SKIPPED']:
            logger.info(message)
        else:
            logger.error(message)

    @staticmethod
    def log_step(step_description: str, name: str = None):
        """Log a step"""
        logger = SimLogger.get_run_logger(name)
        logger.info(f"📋 Step: {step_description}")

    @staticmethod
    def log_check(check: str, result: bool, name: str = None):
        """Log the outcome of a runtime check"""
        logger = SimLogger.get_run_logger(name)
        icon = "✅" if result else "❌"
        level = logging.DEBUG if result else logging.ERROR
        logger.log(level, f"{icon} Check: {check} - {'HOLDS' if result else 'VIOLATED'}")

    @staticmethod
    def log_error(error_message: str, exception: Exception = None, name: str = None):
        """Log an error with optional exception details"""
        logger = SimLogger.get_run_logger(name)
        logger.error(f"💥 Error: {error_message}")

        if exception:
            logger.error(f"Exception details: {str(exception)}")
            logger.debug(f"Exception type: {type(exception).__name__}")

    @staticmethod
    def clear_log_file():
        """Clear the log file"""
        config = Config()
        try:
            if os.path.exists(config.LOG_FILE_PATH):
                with open(config.LOG_FILE_PATH, 'w') as f:
                    f.write("")
                logger = SimLogger.get_run_logger()
                logger.info("🧹 Log file cleared")
        except OSError as e:
            print(f"Warning: Could not clear log file: {e}")

