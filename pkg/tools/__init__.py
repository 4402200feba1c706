"""
工具模块

独立于求解器的辅助工具，例如能量 CSV 校验（energy_csv_checker）。
"""
