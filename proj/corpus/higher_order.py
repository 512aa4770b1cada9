# Procs passed downwards as arguments.
def apply_n(f, x, n):
    for i in range(n):
        x = f(x)
    return x

def double(v):
    return v * 2

def inc(v):
    return v + 1

def scaled(k, x):
    def by_k(v):
        return v * k
    return apply_n(by_k, x, 3)

print(apply_n(double, 1, 10))
print(apply_n(inc, 5, 7))
print(scaled(3, 2))
