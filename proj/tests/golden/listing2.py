# dispatch: auto
# function: add
def add(x, y):
    return x + y
