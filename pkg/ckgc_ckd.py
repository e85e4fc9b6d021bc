#!/usr/bin/env python3
"""
CKGC-CKD

多知识图谱补全工具主程序
"""
import sys

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
