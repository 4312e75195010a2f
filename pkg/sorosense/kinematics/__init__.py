"""Кинематика постоянной кривизны"""
