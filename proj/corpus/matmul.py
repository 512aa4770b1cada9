# Dense matrix product on flattened row-major vectors.
n = 4
a = [0.0] * (n * n)
b = [0.0] * (n * n)
c = [0.0] * (n * n)
for i in range(n):
    for j in range(n):
        a[i * n + j] = i + j * 0.5
        b[i * n + j] = i - j

def matmul(x, y, z, size):
    for i in range(size):
        for j in range(size):
            s = 0.0
            for k in range(size):
                s = s + x[i * size + k] * y[k * size + j]
            z[i * size + j] = s

matmul(a, b, c, n)
print(c)
