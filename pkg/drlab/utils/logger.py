"""日志管理模块"""

import logging
import sys
from logging.handlers import RotatingFileHandler


LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL,
}


class Logger:
    """统一的日志管理器"""

    def __init__(self, name="drlab", level=logging.INFO, log_file=None):
        if isinstance(level, str):
            level = LEVELS.get(level.upper(), logging.INFO)
        self.logger = logging.getLogger(name)
        self.logger.setLevel(level)
        self.logger.handlers.clear()

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        # 控制台只显示 ERROR 及以上，避免打乱扫描进度输出
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(formatter)
        console_handler.setLevel(logging.ERROR)
        self.logger.addHandler(console_handler)

        if log_file:
            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=10*1024*1024,  # 10MB
                backupCount=5,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

    def debug(self, msg, *args):
        self.logger.debug(msg, *args)

    def info(self, msg, *args):
        self.logger.info(msg, *args)

    def warning(self, msg, *args):
        self.logger.warning(msg, *args)

    def error(self, msg, *args):
        self.logger.error(msg, *args)

    def critical(self, msg, *args):
        self.logger.critical(msg, *args)


# 全局日志实例
_logger = None


def get_logger(name="drlab", level=logging.INFO, log_file=None):
    """获取日志实例"""
    global _logger
    if _logger is None:
        _logger = Logger(name, level, log_file)
    return _logger


def setup_logger(name="drlab", level=logging.INFO, log_file=None):
    """
    按配置重建全局日志实例

    Args:
        name: 日志名称
        level: 日志级别（整数或 'INFO' 等字符串）
        log_file: 日志文件路径，None 表示不写文件

    Returns:
        新的 Logger 实例
    """
    global _logger
    _logger = Logger(name, level, log_file)
    return _logger
