print(0.1 + 0.2)
print(1e16, 1.5e-05, 123456789.0, 0.0001)
print(1.0 / 3.0, 2.0 / 3.0)
print(-0.0, 100.0, 1e22, 5e-324)
x = 0.0
for i in range(10):
    x = x + 0.1
print(x)
