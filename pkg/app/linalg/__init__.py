# Linear algebra package initialization
