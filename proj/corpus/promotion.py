# Int to Real promotion by whole-scope inference.
a = 1
print(a)
a = 2.5
print(a)
b = 7 / 2
print(b)
c = 3
c += 0.25
print(c)
print(1 + 2.5)
