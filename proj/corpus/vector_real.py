# Real vectors and a three-point smoothing pass.
n = 8
a = [0.0] * n
for i in range(n):
    a[i] = i * 0.5

def smooth(src, dst, count):
    dst[0] = src[0]
    dst[count - 1] = src[count - 1]
    for i in range(1, count - 1):
        dst[i] = (src[i - 1] + src[i] + src[i + 1]) / 3.0

b = [0.0] * n
smooth(a, b, n)
print(a)
print(b)
print(b[3] - a[3])
