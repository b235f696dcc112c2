#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
启动脚本
运行 meta-rdre 命令行工具
"""

import sys
from main_app import main

if __name__ == "__main__":
    sys.exit(main())
