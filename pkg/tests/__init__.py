"""
测试模块
"""


