"""UI модули для CLI интерфейса"""
