# A dynamic entry point carrying nested helpers with it.
@dynamic
def kernel(n):
    acc = 0

    def add_to(x):
        nonlocal acc
        acc = acc + x

    def sq(x):
        return x * x

    for i in range(n):
        add_to(sq(i))
    return acc

print(kernel(5))
print(kernel(10))
