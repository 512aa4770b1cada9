# dispatch: auto
from epython import dynamic

def add(x, y):
    return x + y

print(add(3, 4))
