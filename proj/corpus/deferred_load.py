# Deferred dynamic functions loaded on demand, deleted and loaded again.
@dynamic(defer=True)
def square(x):
    return x * x

@dynamic(defer=True)
def cube(x):
    return x * x * x

def run(k):
    global square, cube
    square = load_function("square")
    print(square(k))
    del(square)
    cube = load_function("cube")
    print(cube(k))
    square = load_function("square")
    print(square(k) + cube(k))
    del(cube)
    del(square)

run(3)
run(5)
