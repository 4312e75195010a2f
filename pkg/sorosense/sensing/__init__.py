"""Виртуальные сенсоры и калибровка пружин"""
