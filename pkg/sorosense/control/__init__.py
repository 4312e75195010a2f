"""Управление через пространство сенсоров"""
