"""扫描进度输出 - 多线程扫描时按行缓冲打印，避免输出交错"""

import sys
import threading
import time
from typing import List, Optional, TextIO


class SweepProgress:
    """
    扫描进度打印器

    使用场景：
    - ThreadPoolExecutor 中并发完成的扫描点逐个报告进度
    - 静默模式下只计数，不输出

    行格式为 "[进度] <label> <done>/<total> <message>"。
    """

    def __init__(self, label: str, total: int, buffer_size: int = 20,
                 auto_flush_interval: float = 1.0, quiet: bool = False,
                 stream: Optional[TextIO] = None):
        """
        Args:
            label: 扫描名称（通常是实验名）
            total: 扫描点总数
            buffer_size: 缓冲行数，达到后自动刷新
            auto_flush_interval: 自动刷新间隔（秒）
            quiet: 为 True 时不输出
            stream: 输出流，默认 sys.stdout
        """
        self.label = label
        self.total = total
        self.done = 0
        self.buffer: List[str] = []
        self.buffer_size = buffer_size
        self.auto_flush_interval = auto_flush_interval
        self.quiet = quiet
        self.stream = stream
        self.lock = threading.Lock()
        self._last_flush_time = time.time()

    def advance(self, message: str = "") -> int:
        """
        记录一个完成的扫描点

        Args:
            message: 附加说明（如参数值与结果）

        Returns:
            已完成的点数
        """
        with self.lock:
            self.done += 1
            if not self.quiet:
                line = f"[进度] {self.label} {self.done}/{self.total}"
                self.buffer.append(f"{line} {message}" if message else line)
                now = time.time()
                if (len(self.buffer) >= self.buffer_size
                        or now - self._last_flush_time >= self.auto_flush_interval
                        or self.done == self.total):
                    self._flush_internal()
            return self.done

    def flush(self):
        """手动刷新缓冲区"""
        with self.lock:
            self._flush_internal()

    def _flush_internal(self):
        """内部刷新方法（需要已持有锁）"""
        if self.buffer:
            stream = self.stream or sys.stdout
            stream.write('\n'.join(self.buffer) + '\n')
            stream.flush()
            self.buffer.clear()
        self._last_flush_time = time.time()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.flush()
        return False

    def pending(self) -> int:
        """缓冲区中尚未输出的行数"""
        with self.lock:
            return len(self.buffer)
