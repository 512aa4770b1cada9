# dispatch: auto
from epython import dynamic

@dynamic(defer=True)
def add(x, y):
    return x + y

add = load_function("add")
print(add(3, 4))
