"""
stvf.utils

通用工具模块包：
- logger: 统一日志
- export_helper: 按模板导出 CSV
- doc_helper: 研究与场函数的文档信息
"""
