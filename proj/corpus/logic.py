def check(a, b):
    print(a < b, a <= b, a == b, a != b, a > b, a >= b)
    print(a and b, a or b, not a)

check(1, 2)
check(2, 2)
check(0, 5)
x = 3
if x > 1 and x < 5:
    print("in range")
if not (x == 3) or x > 10:
    print("no")
else:
    print("yes")
