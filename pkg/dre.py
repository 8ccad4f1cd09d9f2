#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Derrida-Retaux 凝聚方程数值实验室
每种实验一个子命令，输出 CSV/JSON 数据与验收检查摘要
"""

import argparse
import os
import sys
from typing import List

from drlab.constants import EXPERIMENT_KINDS
from drlab.core import experiments
from drlab.core.analyzer import ResultAnalyzer
from drlab.core.exceptions import ConfigValidationError, DRLabError
from drlab.models.types import ExperimentResult
from drlab.utils.config import Config
from drlab.utils.logger import get_logger, setup_logger

logger = get_logger()

# 设置Windows控制台输出编码
if sys.platform == 'win32':
    import codecs
    if hasattr(sys.stdout, 'buffer'):
        sys.stdout = codecs.getwriter('utf-8')(sys.stdout.buffer, 'strict')
    if hasattr(sys.stderr, 'buffer'):
        sys.stderr = codecs.getwriter('utf-8')(sys.stderr.buffer, 'strict')

SEPARATOR_WIDTH = 100


def print_catalog():
    """打印实验目录"""
    print(f"\n{'='*SEPARATOR_WIDTH}")
    print(f"{'实验':<18} | {'对应图表':<24} | 说明")
    print("-" * SEPARATOR_WIDTH)
    for entry in experiments.list_experiments():
        print(f"{entry['experiment']:<18} | {entry['figure']:<24} | {entry['description']}")
    print(f"{'='*SEPARATOR_WIDTH}\n")


def print_result(result: ExperimentResult, out_dir: str):
    """打印单个实验的验收检查"""
    print(f"\n{'='*SEPARATOR_WIDTH}")
    print(f"实验 {result.experiment.value} 完成，输出目录: {out_dir}")
    print("-" * SEPARATOR_WIDTH)
    print(f"{'检查项':<34} | {'目标':>14} | {'实测':>14} | {'容差':>10} | 结果")
    print("-" * SEPARATOR_WIDTH)
    for check in result.checks:
        mark = '通过' if check.passed else '失败'
        print(f"{check.name:<34} | {check.target:>14.8g} | {check.measured:>14.8g} | "
              f"{check.tolerance:>10.3g} | {mark}")
    print("-" * SEPARATOR_WIDTH)
    for name in result.files:
        print(f"  - {name}")
    print(f"{'='*SEPARATOR_WIDTH}\n")


def run_analyze(out_dir: str) -> int:
    """汇总输出目录中的实验摘要，全部通过时返回 0"""
    analyzer = ResultAnalyzer()
    try:
        rows = analyzer.summarize_dir(out_dir)
    except DRLabError as e:
        print(f"[错误] {e}")
        return 1
    if not rows:
        print(f"[错误] {out_dir} 下未找到实验摘要")
        return 1

    print(f"\n{'='*SEPARATOR_WIDTH}")
    print(f"分析 {out_dir} 目录下的实验结果")
    print(f"{'='*SEPARATOR_WIDTH}\n")
    print(f"{'实验':<18} | {'检查数':<8} | {'通过数':<8} | 结果")
    print("-" * SEPARATOR_WIDTH)
    for row in rows:
        print(f"{row['experiment']:<18} | {row['checks']:<8} | {row['passed_checks']:<8} | "
              f"{'通过' if row['passed'] else '失败'}")
    failed = analyzer.failed_checks(out_dir)
    if failed:
        print("\n未通过的检查:")
        for check in failed:
            print(f"  - {check.name}: 目标 {check.target:.8g}, 实测 {check.measured:.8g}, 容差 {check.tolerance:.3g}")
    print(f"\n{'='*SEPARATOR_WIDTH}\n")
    return 0 if all(row['passed'] for row in rows) else 1


def run_experiments(config: Config, names: List[str], quiet: bool) -> int:
    """依次运行实验，全部检查通过时返回 0"""
    all_passed = True
    for name in names:
        exp_config = config.experiment_config(name)
        try:
            result = experiments.run(exp_config, quiet=quiet)
        except ConfigValidationError as e:
            print(f"[错误] {name} 配置不合法: {e}")
            return 2
        except DRLabError as e:
            logger.error("实验 %s 失败: %s", name, e)
            print(f"[错误] 实验 {name} 失败: {e}")
            all_passed = False
            continue
        print_result(result, exp_config.out)
        all_passed = all_passed and result.passed
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        default='drlab.yaml',
        help='配置文件路径 (默认: drlab.yaml)'
    )
    common.add_argument(
        '--out',
        '-o',
        help='输出目录 (覆盖配置文件)'
    )
    common.add_argument(
        '--seed',
        type=int,
        help='随机种子 (覆盖配置文件)'
    )
    common.add_argument(
        '--threads',
        type=int,
        help='扫描线程数 (覆盖配置文件)'
    )
    common.add_argument(
        '--log-level',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
        help='日志级别'
    )
    common.add_argument(
        '--set',
        dest='overrides',
        action='append',
        metavar='KEY=VALUE',
        help='任意配置覆盖，如 --set experiments.fig5.n=500（可重复）'
    )
    common.add_argument(
        '--param',
        '-p',
        dest='params',
        action='append',
        metavar='KEY=VALUE',
        help='当前实验的参数覆盖，如 -p n=500（可重复）'
    )
    common.add_argument(
        '--quiet',
        '-q',
        action='store_true',
        help='不打印扫描进度'
    )

    parser = argparse.ArgumentParser(
        description='Derrida-Retaux 凝聚方程数值实验室',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例用法:
  # 查看实验目录
  python dre.py list

  # 运行单个实验
  python dre.py critical-point -p family=power-law -p alpha=6
  python dre.py fig5 --out results --threads 8

  # 运行全部实验
  python dre.py all --out results

  # 生成配置模板
  python dre.py init-config drlab.yaml

  # 汇总已有结果
  python dre.py --analyze results
        """
    )
    parser.add_argument(
        '--analyze',
        metavar='DIR',
        help='汇总指定输出目录中的实验摘要'
    )
    sub = parser.add_subparsers(dest='experiment', metavar='COMMAND')
    sub.add_parser('list', help='列出全部实验')
    init = sub.add_parser('init-config', help='生成配置模板')
    init.add_argument('path', nargs='?', default='config_example.yaml')
    sub.add_parser('all', parents=[common], help='依次运行全部实验')
    for entry in experiments.list_experiments():
        sub.add_parser(entry['experiment'], parents=[common],
                       help=f"{entry['figure']}: {entry['description']}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.analyze:
        return run_analyze(args.analyze)
    if args.experiment is None:
        parser.print_help()
        return 0
    if args.experiment == 'list':
        print_catalog()
        return 0
    if args.experiment == 'init-config':
        Config.create_template(args.path)
        return 0

    if os.path.exists(args.config):
        config = Config(args.config)
        print(f"[信息] 已加载配置文件: {args.config}\n")
    else:
        config = Config()
    names = list(EXPERIMENT_KINDS) if args.experiment == 'all' else [args.experiment]
    if args.experiment == 'all' and args.params:
        parser.error("--param 只能用于单个实验，请改用 --set experiments.<实验>.key=value")
    config.override_from_args(args)

    setup_logger(level=config.get('logging.level', 'INFO'), log_file=config.get('logging.file'))
    return run_experiments(config, names, args.quiet)


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n实验已取消")
        sys.exit(0)
