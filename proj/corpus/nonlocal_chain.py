# Three nested scopes; the innermost updates variables two and one levels out.
def outer(n):
    acc = 0
    scale = 2

    def middle(k):
        step = k * scale

        def inner(j):
            nonlocal acc, step
            acc = acc + j * step
            step = step + 1
            return acc

        r = 0
        for j in range(3):
            r = inner(j)
        return r + step

    for k in range(n):
        print(k, middle(k), acc)
    return acc

print(outer(4))
