"""Утилиты для SoroSense"""
