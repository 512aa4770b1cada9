# Integer vectors: fill, update, sum, len and printing.
v = [0] * 10
for i in range(len(v)):
    v[i] = i * i

def total(xs):
    s = 0
    for i in range(len(xs)):
        s = s + xs[i]
    return s

print(v)
print(len(v), total(v))
w = [3, 1, 4, 1, 5, 9, 2, 6]
w[0] = w[7] + w[6]
print(w, total(w))
