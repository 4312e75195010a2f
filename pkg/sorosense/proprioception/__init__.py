"""Датасеты, обучение и оценка проприоцепции"""
