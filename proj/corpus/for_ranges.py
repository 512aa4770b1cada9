for i in range(3):
    print(i)
for i in range(2, 5):
    print(i)
for i in range(10, 0, -3):
    print(i)
for i in range(0, 10, 4):
    print(i)
s = 0
for i in range(5, 5):
    s = s + 1
print(s, i)
