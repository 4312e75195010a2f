"""
SoroSense - проприоцепция и управление мягким манипулятором
Слияние сигналов пружин и IMU, перенос sim-to-real и управление через пространство сенсоров
"""

__version__ = "1.0.0"
__author__ = "SoroSense Team"
