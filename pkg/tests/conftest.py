# Makes this directory importable by the test modules (helpers.py).
