"""结果输出 - CSV/JSON 写入（原子替换，逐字节可复现）"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from drlab import constants
from drlab.models.types import ExperimentResult


def _format_value(value: Any) -> str:
    """浮点数用 17 位有效数字，'.' 作小数点"""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return constants.FLOAT_FORMAT % float(value)
    if value is None:
        return ''
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else str(v)
    if hasattr(value, 'value') and hasattr(value, 'name'):
        return value.value
    if hasattr(value, 'to_dict'):
        return _jsonable(value.to_dict())
    return value


def atomic_write(path: str, content: str):
    """写入临时文件后 os.replace，读者不会看到半个文件"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent), prefix=f".{target.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Reporter:
    """
    实验输出写入器

    每个 CSV 以 '# ' 开头的元数据行开始：实验名、模块元数据与完整的配置回显。
    不写时间戳，同样的输入得到逐字节相同的文件。
    """

    def __init__(self, out_dir: str, experiment: str, config: Optional[Dict] = None):
        self.out_dir = Path(out_dir)
        self.experiment = experiment
        self.config = config or {}
        self.files: List[str] = []

    def path(self, name: str) -> str:
        return str(self.out_dir / name)

    def _meta_lines(self, meta: Optional[Dict]) -> List[str]:
        lines = [f"{constants.META_PREFIX}experiment: {self.experiment}"]
        for key in sorted(meta or {}):
            lines.append(f"{constants.META_PREFIX}{key}: {json.dumps(_jsonable(meta[key]), ensure_ascii=False, sort_keys=True)}")
        lines.append(f"{constants.META_PREFIX}config: {json.dumps(_jsonable(self.config), ensure_ascii=False, sort_keys=True)}")
        return lines

    def save_csv(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]],
                 meta: Optional[Dict] = None, footer: Optional[Dict] = None) -> str:
        """
        保存 CSV

        Args:
            name: 文件名（相对输出目录）
            columns: 列名
            rows: 数据行
            meta: 写入表头注释的元数据
            footer: 写入表尾注释的元数据（如轨迹的守恒量漂移）

        Returns:
            文件路径
        """
        buf = io.StringIO()
        for line in self._meta_lines(meta):
            buf.write(line + '\n')
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([_format_value(v) for v in row])
        for key in sorted(footer or {}):
            buf.write(f"{constants.META_PREFIX}{key}: {json.dumps(_jsonable(footer[key]), sort_keys=True)}\n")
        path = self.path(name)
        atomic_write(path, buf.getvalue())
        self.files.append(path)
        return path

    def save_json(self, name: str, data: Any) -> str:
        """保存为 JSON 格式"""
        content = json.dumps(_jsonable(data), ensure_ascii=False, indent=2, sort_keys=True) + '\n'
        path = self.path(name)
        atomic_write(path, content)
        self.files.append(path)
        return path

    def save_tree(self, name: str, root) -> str:
        """树写成嵌套 JSON"""
        return self.save_json(name, root.to_dict())

    def save_summary(self, result: ExperimentResult) -> str:
        """写 <experiment>_summary.json，包含全部验收检查"""
        data = result.to_dict()
        data['config'] = self.config
        data['files'] = [os.path.basename(f) for f in self.files]
        return self.save_json(f"{self.experiment}_summary.json", data)


def read_csv(path: str):
    """读取本模块写出的 CSV，返回 (元数据行, 列名, 浮点数组)"""
    meta, body = [], []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if line.startswith(constants.META_PREFIX.strip()):
                meta.append(line.rstrip('\n'))
            else:
                body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return meta, columns, data
