"""Минимальная полносвязная нейросеть"""
