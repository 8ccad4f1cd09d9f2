"""
Derrida-Retaux 凝聚方程数值实验室
"""

__version__ = "1.0.0"
__author__ = "DRLab Team"
