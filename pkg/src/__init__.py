# -*- coding: utf-8 -*-
"""Syntax-directed attention for neural machine translation."""
