"""Виртуальный пневматический манипулятор"""
